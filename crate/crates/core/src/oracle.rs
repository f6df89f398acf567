//! Slow, independent reference evaluations used by the verification suites.

use num_complex::Complex64;

use crate::amplifier::AmplifierParams;
use crate::characters::DirichletCharacter;
use crate::error::{Error, Result};
use crate::forms::HeckeEigenform;
use crate::lfunc::truncation;
use crate::ntheory::{euler_phi, gcd, is_prime};
use crate::special::kernel_weight;
use crate::summation::{ComplexSum, NeumaierSum};

/// Largest number of quadruples [`s_quadruple_loop`] will visit.
pub const QUADRUPLE_LIMIT: u64 = 200_000_000;

/// S as the literal quadruple sum over (m1, m2, l1, l2) with
/// m1 l1 = m2 l2 (mod Q), each term
/// phi(Q) A(m1) A(m2) conj(chi(l1)) chi(l2) (l1 l2)^alpha
/// m1^{-1/2-it} m2^{-1/2+it} V(m1/x) V(m2/x) G e^{-G |log(l1 m1/(l2 m2))|}.
pub fn s_quadruple_loop(p: &AmplifierParams, f: &HeckeEigenform, chi: &DirichletCharacter) -> Result<f64> {
    let m_max = truncation(p.x);
    let np = p.primes.len() as u64;
    if m_max * m_max * np * np > QUADRUPLE_LIMIT {
        return Err(Error::TruncationOverflow(format!(
            "quadruple loop over {m_max}^2 x {np}^2 terms exceeds {QUADRUPLE_LIMIT}"
        )));
    }
    let tt = p.t + p.r_offset;
    let mut acc = ComplexSum::new();
    for m1 in 1..=m_max {
        let a1 = f.coefficient(m1)?;
        if a1 == 0.0 {
            continue;
        }
        let v1 = kernel_weight(m1 as f64 / p.x);
        let p1 = Complex64::new(m1 as f64, 0.0).powc(Complex64::new(-0.5, -tt));
        for m2 in 1..=m_max {
            let a2 = f.coefficient(m2)?;
            let v2 = kernel_weight(m2 as f64 / p.x);
            let p2 = Complex64::new(m2 as f64, 0.0).powc(Complex64::new(-0.5, tt));
            for &l1 in &p.primes {
                for &l2 in &p.primes {
                    if (m1 * l1) % p.q != (m2 * l2) % p.q {
                        continue;
                    }
                    let ratio = (l1 * m1) as f64 / (l2 * m2) as f64;
                    let kernel = p.g * (-p.g * ratio.ln().abs()).exp();
                    let amp = chi.value_u(l1).conj() * chi.value_u(l2) * ((l1 * l2) as f64).powf(p.alpha);
                    acc.add(amp * p1 * p2 * (a1 * a2 * v1 * v2 * kernel));
                }
            }
        }
    }
    Ok(euler_phi(p.q) as f64 * acc.value().re)
}

/// E_{l1,l2}(s) from the two Dirichlet series restricted to
/// {l1, l2}-smooth m, summed until the terms fall below 2^{-40 s}.
///
/// Multiplicativity makes the coprime part of m cancel exactly between
/// numerator and denominator, so the restricted ratio equals E_{l1,l2}(s).
pub fn euler_ratio_smooth_series(f: &HeckeEigenform, l1: u64, l2: u64, s: f64) -> Result<f64> {
    check_pair(f, l1, l2)?;
    if !(s > 0.5) {
        return Err(Error::invalid("smooth-series ratio needs s > 1/2"));
    }
    let mut num = NeumaierSum::new();
    let mut den = NeumaierSum::new();
    let limit = 1u64 << 40;
    let mut a = 1u64;
    while a < limit {
        let mut m = a;
        while m < limit {
            let w = (m as f64).powf(-s);
            num.add(f.coefficient(l2 * m)? * f.coefficient(l1 * m)? * w);
            den.add(f.coefficient(m)?.powi(2) * w);
            m *= l2;
        }
        a *= l1;
    }
    Ok(num.value() / den.value())
}

/// The unrestricted truncated ratio
/// sum_{m <= M} A(l2 m) A(l1 m) m^{-s} / sum_{m <= M} A(m)^2 m^{-s}.
pub fn euler_ratio_truncated(f: &HeckeEigenform, l1: u64, l2: u64, s: f64, m_max: u64) -> Result<f64> {
    check_pair(f, l1, l2)?;
    let mut num = NeumaierSum::new();
    let mut den = NeumaierSum::new();
    for m in 1..=m_max {
        let w = (m as f64).powf(-s);
        num.add(f.coefficient(l2 * m)? * f.coefficient(l1 * m)? * w);
        den.add(f.coefficient(m)?.powi(2) * w);
    }
    Ok(num.value() / den.value())
}

fn check_pair(f: &HeckeEigenform, l1: u64, l2: u64) -> Result<()> {
    if l1 == l2 || !is_prime(l1) || !is_prime(l2) || gcd(l1 * l2, f.level()) != 1 {
        return Err(Error::invalid(format!(
            "({l1}, {l2}) must be distinct primes coprime to the level"
        )));
    }
    Ok(())
}
