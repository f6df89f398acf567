//! Python bindings: the module is importable as `twistlab`.

use std::sync::Arc;

use num_complex::Complex64;
use num_rational::Rational64;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyOverflowError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use twistlab::amplifier::{compute_decomposition, derive_params, GChoice, LChoice, ParamRequest};
use twistlab::characters::CharacterGroup;
use twistlab::config::RunConfig;
use twistlab::forms::{builtin_delta, euler_ratio as core_euler_ratio};
use twistlab::lfunc::{rational_to_f64, smoothed_l as core_smoothed_l, ExponentTable};
use twistlab::spectral::{
    c_r_residue as core_c_r_residue, kappa as core_kappa, kappa_exact as core_kappa_exact,
    m_closed_form as core_m_closed_form, z_q_direct, KappaParams, ShiftedConvolutionPoint, Sign,
};
use twistlab::verify::{run_suite, Suite};
use twistlab::Error;

fn py_err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Pole { .. } | Error::Singular { .. } => PyArithmeticError::new_err(msg),
        Error::Overflow(_) | Error::TruncationOverflow(_) | Error::CacheCap { .. } => PyOverflowError::new_err(msg),
        Error::Io(_) => PyOSError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

fn character(q: u64, index: u64) -> PyResult<twistlab::characters::DirichletCharacter> {
    Arc::new(CharacterGroup::new(q).map_err(py_err)?)
        .character(index)
        .map_err(py_err)
}

/// Normalized coefficient A(n) of Delta.
#[pyfunction]
fn delta_coefficient(n: u64) -> PyResult<f64> {
    builtin_delta().coefficient(n).map_err(py_err)
}

/// chi(n) for the character of canonical index `index` modulo q.
#[pyfunction]
fn character_value(q: u64, index: u64, n: i64) -> PyResult<Complex64> {
    Ok(character(q, index)?.value(n))
}

/// Number of characters modulo q.
#[pyfunction]
fn character_count(q: u64) -> PyResult<u64> {
    Ok(CharacterGroup::new(q).map_err(py_err)?.order())
}

/// Smoothed L(1/2 + it) of Delta twisted by a character; returns (value, terms).
#[pyfunction]
fn smoothed_l(q: u64, chi_index: u64, t: f64, x: f64) -> PyResult<(Complex64, u64)> {
    let v = core_smoothed_l(&builtin_delta(), &character(q, chi_index)?, t, x).map_err(py_err)?;
    Ok((v.value, v.n_terms))
}

/// E_{l1,l2}(s) for Delta.
#[pyfunction]
fn euler_ratio(l1: u64, l2: u64, s: Complex64) -> PyResult<Complex64> {
    Ok(core_euler_ratio(&builtin_delta(), l1, l2, s).map_err(py_err)?.value)
}

/// Amplified moment of Delta and its four pieces.
///
/// `l` selects primes in (l, 2l]; when omitted L = Q^{1/4}. `primes`
/// overrides the window.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (q, t, x, g, l=None, primes=None, chi_index=1))]
fn decompose<'py>(
    py: Python<'py>,
    q: u64,
    t: f64,
    x: f64,
    g: f64,
    l: Option<f64>,
    primes: Option<Vec<u64>>,
    chi_index: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let f = builtin_delta();
    let lc = match (primes, l) {
        (Some(primes), l) => LChoice::Primes {
            l: l.unwrap_or(0.5),
            primes,
        },
        (None, Some(l)) => LChoice::Fixed(l),
        (None, None) => LChoice::Theorem,
    };
    let p = derive_params(&ParamRequest {
        g: GChoice::Fixed(g),
        l: lc,
        x: Some(x),
        ..ParamRequest::theorem(q, t, f.level())
    })
    .map_err(py_err)?;
    let d = compute_decomposition(&p, &f, &character(q, chi_index)?).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("primes", p.primes.clone())?;
    out.set_item("s_direct", d.s_direct)?;
    out.set_item("s_d1", d.s_d1)?;
    out.set_item("s_d2", d.s_d2)?;
    out.set_item("s_o1", d.s_o1)?;
    out.set_item("s_o2", d.s_o2)?;
    out.set_item("relative_mismatch", d.relative_mismatch())?;
    out.set_item("conjugacy_error", d.conjugacy_error())?;
    out.set_item("h_max", d.h_max)?;
    Ok(out)
}

/// Closed-form M(s, z).
#[pyfunction]
fn m_closed_form(s: Complex64, z: Complex64) -> PyResult<Complex64> {
    core_m_closed_form(s, z).map_err(py_err)
}

/// Residue c_r(+z) (plus=True) or c_r(-z).
#[pyfunction]
#[pyo3(signature = (r, z, plus=true))]
fn c_r_residue(r: u32, z: Complex64, plus: bool) -> PyResult<Complex64> {
    core_c_r_residue(r, z, if plus { Sign::Plus } else { Sign::Minus }).map_err(py_err)
}

/// kappa for the cusp 1/w of level N at modulus Q.
#[pyfunction]
fn kappa(level: u64, w: u64, q: u64, s_prime: Complex64, z: Complex64) -> PyResult<Complex64> {
    core_kappa(&KappaParams {
        level,
        w,
        q,
        s_prime,
        z,
    })
    .map_err(py_err)
}

/// Exact kappa for rational s' and z given as (numerator, denominator); returns "a/b".
#[pyfunction]
fn kappa_exact(level: u64, w: u64, q: u64, s_prime: (i64, i64), z: (i64, i64)) -> PyResult<String> {
    if s_prime.1 == 0 || z.1 == 0 {
        return Err(PyValueError::new_err("zero denominator"));
    }
    let s = Rational64::new(s_prime.0, s_prime.1);
    let z = Rational64::new(z.0, z.1);
    Ok(core_kappa_exact(level, w, q, s, z).map_err(py_err)?.to_string())
}

/// Truncated Z_Q(s, w) for Delta; returns (value, tail_bound).
#[pyfunction]
#[pyo3(signature = (s, w, l1, l2, q, m_max=1000, h_max=1000))]
fn zq(s: Complex64, w: Complex64, l1: u64, l2: u64, q: u64, m_max: u64, h_max: u64) -> PyResult<(Complex64, f64)> {
    let pt = ShiftedConvolutionPoint {
        s,
        w,
        l1,
        l2,
        q,
        m_max,
        h_max,
    };
    let v = z_q_direct(&pt, &builtin_delta()).map_err(py_err)?;
    Ok((v.value, v.tail_bound))
}

/// Reference exponents as (name, value) pairs for a given theta.
#[pyfunction]
#[pyo3(signature = (theta="7/64"))]
fn exponent_table(theta: &str) -> PyResult<Vec<(String, f64)>> {
    let th = twistlab::config::parse_theta(theta).map_err(py_err)?;
    Ok(ExponentTable::new(th)
        .comparison_rows()
        .into_iter()
        .map(|(n, r)| (n.to_string(), rational_to_f64(r)))
        .collect())
}

/// Runs a verification suite with default settings and the given seed;
/// returns the JSON report.
#[pyfunction]
#[pyo3(signature = (suite, seed=1))]
fn verify(py: Python<'_>, suite: &str, seed: u64) -> PyResult<String> {
    let suite: Suite = suite.parse().map_err(py_err)?;
    let mut cfg = RunConfig::default();
    cfg.run.seed = seed;
    py.detach(|| run_suite(suite, &cfg).map(|r| r.to_json())).map_err(py_err)
}

#[pymodule]
#[pyo3(name = "twistlab")]
fn twistlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(delta_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(character_value, m)?)?;
    m.add_function(wrap_pyfunction!(character_count, m)?)?;
    m.add_function(wrap_pyfunction!(smoothed_l, m)?)?;
    m.add_function(wrap_pyfunction!(euler_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(m_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(c_r_residue, m)?)?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(kappa_exact, m)?)?;
    m.add_function(wrap_pyfunction!(zq, m)?)?;
    m.add_function(wrap_pyfunction!(exponent_table, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_python_types() {
        Python::initialize();
        Python::attach(|py| {
            let e = py_err(Error::Pole {
                function: "Gamma",
                at: "0".into(),
            });
            assert!(e.is_instance_of::<PyArithmeticError>(py));
            assert!(py_err(Error::InvalidArgument("x".into())).is_instance_of::<PyValueError>(py));
            assert!(py_err(Error::TruncationOverflow("x".into())).is_instance_of::<PyOverflowError>(py));
        });
    }

    #[test]
    fn module_functions_run_in_process() {
        Python::initialize();
        Python::attach(|py| {
            assert_eq!(delta_coefficient(1).unwrap(), 1.0);
            assert_eq!(kappa_exact(6, 1, 7, (1, 2), (-1, 2)).unwrap(), "1/12");
            let d = decompose(py, 11, 0.0, 60.0, 12.0, None, None, 1).unwrap();
            let mismatch: f64 = d.get_item("relative_mismatch").unwrap().unwrap().extract().unwrap();
            assert!(mismatch < 1e-9);
        });
    }
}
