//! Numerical laboratory for the amplified second moment of twisted modular
//! L-functions.
//!
//! The crate evaluates smoothed twisted L-values, the amplified moment and its
//! diagonal/off-diagonal decomposition, shifted convolution sums, and the
//! closed-form constants attached to them, together with the checks that
//! verify the identities relating these objects.

// `!(x > 0.0)` guards are written to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amplifier;
pub mod characters;
pub mod config;
pub mod error;
pub mod forms;
pub mod lfunc;
pub mod ntheory;
pub mod oracle;
pub mod regression;
pub mod scan;
pub mod special;
pub mod spectral;
pub mod summation;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;
