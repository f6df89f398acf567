//! Twisted L-values: the absolutely convergent Dirichlet series, the
//! smoothed critical-line sum, and the exponent bookkeeping used to compare
//! scan data with known bounds.

use std::sync::OnceLock;

use num_complex::Complex64;
use num_rational::Rational64;
use num_traits::ToPrimitive;

use crate::characters::DirichletCharacter;
use crate::error::{Error, Result};
use crate::forms::HeckeEigenform;
use crate::ntheory::sieved_primes;
use crate::regression::fit_plane;
use crate::special::{kernel_weight, SmoothingKernel};
use crate::summation::ComplexSum;

/// Largest number of terms a single smoothed evaluation may use.
pub const MAX_TERMS: u64 = 100_000_000;

/// Truncation point ceil(2.06 x) of a smoothed sum with cutoff x.
pub fn truncation(x: f64) -> u64 {
    (SmoothingKernel::CUTOFF * x).ceil() as u64
}

/// C_eps = prod_p max_k (k+1) p^{-k eps}, so that d(n) <= C_eps n^eps.
pub fn divisor_bound_constant(eps: f64) -> f64 {
    assert!(eps > 0.0 && eps < 1.0);
    let mut acc = 1.0;
    for &p in sieved_primes() {
        let p = p as f64;
        // Only primes with p^eps < 2 can contribute a factor above 1.
        if p.powf(eps) >= 2.0 {
            break;
        }
        let mut best: f64 = 1.0;
        let mut k = 1.0;
        loop {
            let v = (k + 1.0) * p.powf(-k * eps);
            if v < best && k > 1.0 / (eps * p.ln()) + 1.0 {
                break;
            }
            best = best.max(v);
            k += 1.0;
        }
        acc *= best;
    }
    acc
}

fn divisor_constant_cached(eps: f64) -> f64 {
    static QUARTER: OnceLock<f64> = OnceLock::new();
    if eps == 0.25 {
        *QUARTER.get_or_init(|| divisor_bound_constant(0.25))
    } else {
        divisor_bound_constant(eps)
    }
}

/// Bound for sum_{n > n_max} d(n) n^{-sigma}, for sigma > 1.
pub fn divisor_tail_bound(n_max: u64, sigma: f64) -> f64 {
    let eps = ((sigma - 1.0) / 2.0).min(0.25);
    let c = divisor_constant_cached(eps);
    c * (n_max as f64).powf(1.0 + eps - sigma) / (sigma - 1.0 - eps)
}

/// Partial Dirichlet series with its Deligne tail bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: Complex64,
    pub tail_bound: f64,
    pub n_max: u64,
}

/// sum_{n <= n_max} A(n) chi(n) n^{-s} for Re s > 3/2.
pub fn dirichlet_series(
    f: &HeckeEigenform,
    chi: &DirichletCharacter,
    s: Complex64,
    n_max: u64,
) -> Result<SeriesValue> {
    if !(s.re > 1.5) {
        return Err(Error::invalid(format!(
            "dirichlet_series needs Re s > 3/2, got {s}"
        )));
    }
    let table = chi.value_table();
    let q = chi.modulus();
    let mut acc = ComplexSum::new();
    for n in 1..=n_max {
        let c = table[(n % q) as usize];
        if c.re == 0.0 && c.im == 0.0 {
            continue;
        }
        let w = (-s * (n as f64).ln()).exp();
        acc.add(c * w * f.coefficient(n)?);
    }
    Ok(SeriesValue {
        value: acc.value(),
        tail_bound: divisor_tail_bound(n_max, s.re),
        n_max,
    })
}

/// A smoothed sum with the number of terms it used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedValue {
    pub value: Complex64,
    pub n_terms: u64,
}

/// sum_{n <= 2.06 x} A(n) c(n) n^{-s} V(n/x) for an arbitrary twist c.
pub fn smoothed_sum_with<C>(f: &HeckeEigenform, twist: C, s: Complex64, x: f64) -> Result<SmoothedValue>
where
    C: Fn(u64) -> Complex64,
{
    if !(x > 0.0) {
        return Err(Error::invalid(format!("cutoff x must be positive, got {x}")));
    }
    let n_max = truncation(x);
    if n_max > MAX_TERMS {
        return Err(Error::TruncationOverflow(format!(
            "x = {x} needs {n_max} terms (limit {MAX_TERMS})"
        )));
    }
    let mut acc = ComplexSum::new();
    for n in 1..=n_max {
        let c = twist(n);
        if c.re == 0.0 && c.im == 0.0 {
            continue;
        }
        let ln = (n as f64).ln();
        let w = (-s * ln).exp() * kernel_weight(n as f64 / x);
        acc.add(c * w * f.coefficient(n)?);
    }
    Ok(SmoothedValue {
        value: acc.value(),
        n_terms: n_max,
    })
}

/// Smoothed approximation to L(1/2 + it, f x chi):
/// sum_{n <= 2.06 x} A(n) chi(n) n^{-1/2-it} V(n/x), for x >= 10.
pub fn smoothed_l(f: &HeckeEigenform, chi: &DirichletCharacter, t: f64, x: f64) -> Result<SmoothedValue> {
    if !(x >= 10.0) {
        return Err(Error::invalid(format!("smoothed_l needs x >= 10, got {x}")));
    }
    let table = chi.value_table();
    let q = chi.modulus();
    smoothed_sum_with(f, |n| table[(n % q) as usize], Complex64::new(0.5, t), x)
}

/// Smoothed sum at a general point s (weight n^{-s} in place of n^{-1/2-it}).
pub fn smoothed_at(f: &HeckeEigenform, chi: &DirichletCharacter, s: Complex64, x: f64) -> Result<SmoothedValue> {
    let table = chi.value_table();
    let q = chi.modulus();
    smoothed_sum_with(f, |n| table[(n % q) as usize], s, x)
}

// ---------------------------------------------------------------------------
// Exponents

/// Reference exponents for the growth of twisted L-values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentTable {
    pub theta: Rational64,
}

impl Default for ExponentTable {
    fn default() -> Self {
        Self {
            theta: Rational64::new(7, 64),
        }
    }
}

impl ExponentTable {
    pub fn new(theta: Rational64) -> Self {
        Self { theta }
    }

    pub fn convexity() -> Rational64 {
        Rational64::new(1, 2)
    }

    pub fn q_aspect() -> Rational64 {
        Rational64::new(3, 8)
    }

    pub fn blomer_harcos() -> Rational64 {
        Rational64::new(1, 2) - Rational64::new(1, 40)
    }

    pub fn munshi() -> Rational64 {
        Rational64::new(1, 2) - Rational64::new(1, 18)
    }

    pub fn wu(&self) -> Rational64 {
        Rational64::new(3, 8) + self.theta / 4
    }

    /// t-exponent 1/(3 - 2 theta) of the hybrid bound.
    pub fn t_exponent(&self) -> Rational64 {
        (Rational64::from_integer(3) - self.theta * 2).recip()
    }

    /// Exponent 2/(3 - 2 theta) of (1 + |t|) in the amplifier length G.
    pub fn g_exponent(&self) -> Rational64 {
        self.t_exponent() * 2
    }

    /// Named constants for side-by-side comparison with fitted slopes.
    pub fn comparison_rows(&self) -> Vec<(&'static str, Rational64)> {
        vec![
            ("convexity", Self::convexity()),
            ("q_aspect", Self::q_aspect()),
            ("hybrid_t_exponent", self.t_exponent()),
            ("blomer_harcos", Self::blomer_harcos()),
            ("munshi", Self::munshi()),
            ("wu", self.wu()),
        ]
    }
}

/// Converts a float theta to the nearest rational with denominator <= 2^20.
pub fn theta_to_rational(theta: f64) -> Result<Rational64> {
    if !(0.0..0.5).contains(&theta) {
        return Err(Error::invalid(format!("theta must lie in [0, 1/2), got {theta}")));
    }
    Rational64::approximate_float(theta)
        .filter(|r| *r.denom() <= 1 << 20)
        .map_or_else(
            || Ok(Rational64::new((theta * (1 << 20) as f64).round() as i64, 1 << 20)),
            Ok,
        )
}

pub fn rational_to_f64(r: Rational64) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Descriptive bivariate regression of log|L| on (log Q, log(1+|t|)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentFit {
    pub slope_q: f64,
    pub slope_t: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Fits log|L| = slope_q log Q + slope_t log(1+|t|) + c.
///
/// Requires at least 8 samples with Q and 1+|t| each spanning a factor of
/// ten.
pub fn exponent_fit(samples: &[(f64, f64, f64)]) -> Result<ExponentFit> {
    if samples.len() < 8 {
        return Err(Error::Degenerate(format!(
            "exponent fit needs at least 8 samples, got {}",
            samples.len()
        )));
    }
    let span = |v: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = v.fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(x), b.max(x)));
        hi / lo
    };
    if span(&mut samples.iter().map(|s| s.0)) < 10.0 {
        return Err(Error::Degenerate("Q values do not span a decade".into()));
    }
    if span(&mut samples.iter().map(|s| 1.0 + s.1.abs())) < 10.0 {
        return Err(Error::Degenerate("1+|t| values do not span a decade".into()));
    }
    let mut pts = Vec::with_capacity(samples.len());
    for &(q, t, l) in samples {
        if !(q > 0.0) || !(l > 0.0) || !t.is_finite() {
            return Err(Error::Degenerate(format!(
                "sample (Q={q}, t={t}, |L|={l}) has no finite logarithm"
            )));
        }
        pts.push((q.ln(), (1.0 + t.abs()).ln(), l.ln()));
    }
    let fit = fit_plane(&pts)?;
    Ok(ExponentFit {
        slope_q: fit.slope_x,
        slope_t: fit.slope_y,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        samples: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characters::CharacterGroup;
    use crate::forms::builtin_delta;
    use std::sync::Arc;

    fn group(q: u64) -> Arc<CharacterGroup> {
        Arc::new(CharacterGroup::new(q).unwrap())
    }

    #[test]
    fn divisor_constant_bounds_divisor_function() {
        let c = divisor_bound_constant(0.25);
        assert!(c > 1.0 && c < 20.0);
        for n in 1..=200_000u64 {
            let d = crate::ntheory::divisor_count(n) as f64;
            assert!(d <= c * (n as f64).powf(0.25) * (1.0 + 1e-12), "n={n}");
        }
    }

    #[test]
    fn divisor_tail_bound_is_honest() {
        // Compare the bound with a direct partial tail.
        let sigma = 2.0;
        let mut tail = 0.0;
        for n in 1001..=2_000_000u64 {
            tail += crate::ntheory::divisor_count(n) as f64 * (n as f64).powf(-sigma);
        }
        assert!(tail < divisor_tail_bound(1000, sigma));
    }

    #[test]
    fn dirichlet_series_self_consistency() {
        let f = builtin_delta();
        let chi = group(1).principal();
        let s = Complex64::new(2.0, 0.0);
        let a = dirichlet_series(&f, &chi, s, 1_000).unwrap();
        let b = dirichlet_series(&f, &chi, s, 10_000).unwrap();
        assert!((a.value - b.value).norm() < a.tail_bound);
        assert!(b.tail_bound < a.tail_bound);
        assert!(dirichlet_series(&f, &chi, Complex64::new(1.5, 0.0), 10).is_err());
    }

    #[test]
    fn dirichlet_series_character_support() {
        let f = builtin_delta();
        let chi = group(2).principal();
        let s = Complex64::new(2.0, 1.0);
        let got = dirichlet_series(&f, &chi, s, 5_000).unwrap().value;
        let mut odd = ComplexSum::new();
        for n in (1..=5_000u64).step_by(2) {
            odd.add((-s * (n as f64).ln()).exp() * f.coefficient(n).unwrap());
        }
        assert!((got - odd.value()).norm() < 1e-14);
    }

    #[test]
    fn dirichlet_series_converges_for_nonprincipal_character() {
        let f = builtin_delta();
        let chi = group(5).character(1).unwrap();
        let s = Complex64::new(2.0, 0.0);
        let pinned = dirichlet_series(&f, &chi, s, 100_000).unwrap();
        let coarse = dirichlet_series(&f, &chi, s, 10_000).unwrap();
        assert!((pinned.value - coarse.value).norm() < coarse.tail_bound);
    }

    #[test]
    fn smoothed_l_x_stability() {
        let f = builtin_delta();
        let chi = group(1).principal();
        for &x in &[1_000.0, 4_000.0] {
            let a = smoothed_l(&f, &chi, 0.0, x).unwrap().value;
            let b = smoothed_l(&f, &chi, 0.0, 2.0 * x).unwrap().value;
            assert!((a - b).norm() < x.powf(-0.5), "x={x}");
        }
        assert!(smoothed_l(&f, &chi, 0.0, 9.0).is_err());
    }

    #[test]
    fn smoothing_at_s2_reproduces_series() {
        let f = builtin_delta();
        let chi = group(7).character(2).unwrap();
        let s = Complex64::new(2.0, 0.0);
        let series = dirichlet_series(&f, &chi, s, 100_000).unwrap();
        let smooth = smoothed_at(&f, &chi, s, 40_000.0).unwrap();
        // Both the smoothing bias and the series truncation are far below the
        // Deligne tail bound here.
        assert!((smooth.value - series.value).norm() < series.tail_bound);
        assert!((smooth.value - series.value).norm() < 1e-8);
    }

    #[test]
    fn smoothed_l_support_and_linearity() {
        let f = builtin_delta();
        let g = group(5);
        let chi = g.character(3).unwrap();
        let x = 300.0;
        let table = chi.value_table();
        let base = smoothed_l(&f, &chi, 1.3, x).unwrap().value;
        // Terms with 5 | n contribute nothing: zero them explicitly.
        let filtered = smoothed_sum_with(
            &f,
            |n| if n % 5 == 0 { Complex64::new(0.0, 0.0) } else { table[(n % 5) as usize] },
            Complex64::new(0.5, 1.3),
            x,
        )
        .unwrap()
        .value;
        assert_eq!(base, filtered);
        let a = Complex64::new(0.3, -1.7);
        let scaled = smoothed_sum_with(&f, |n| a * table[(n % 5) as usize], Complex64::new(0.5, 1.3), x)
            .unwrap()
            .value;
        assert!((scaled - a * base).norm() < 1e-12 * base.norm().max(1.0));
    }

    #[test]
    fn principal_character_removes_multiples() {
        let f = builtin_delta();
        let q = 15u64;
        let chi = group(q).principal();
        let x = 500.0;
        let got = smoothed_l(&f, &chi, 4.0, x).unwrap().value;
        let mut acc = ComplexSum::new();
        let s = Complex64::new(0.5, 4.0);
        for n in 1..=truncation(x) {
            if n % 3 == 0 || n % 5 == 0 {
                continue;
            }
            acc.add(f.coefficient(n).unwrap() * (-s * (n as f64).ln()).exp() * kernel_weight(n as f64 / x));
        }
        assert!((got - acc.value()).norm() < 1e-12);
    }

    #[test]
    fn doubling_x_differences_shrink_in_trend() {
        let f = builtin_delta();
        let chi = group(1).principal();
        let vals: Vec<Complex64> = (0..5)
            .map(|k| smoothed_l(&f, &chi, 0.0, 500.0 * 2f64.powi(k)).unwrap().value)
            .collect();
        let diffs: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        assert!(diffs.last().unwrap() < diffs.first().unwrap());
    }

    #[test]
    fn exponent_table_constants() {
        let t = ExponentTable::default();
        assert_eq!(t.t_exponent(), Rational64::new(32, 89));
        assert_eq!(t.g_exponent(), Rational64::new(64, 89));
        assert_eq!(t.wu(), Rational64::new(103, 256));
        assert_eq!(ExponentTable::blomer_harcos(), Rational64::new(19, 40));
        assert_eq!(ExponentTable::munshi(), Rational64::new(4, 9));
        assert_eq!(theta_to_rational(7.0 / 64.0).unwrap(), Rational64::new(7, 64));
    }

    fn grid() -> Vec<(f64, f64)> {
        let mut g = Vec::new();
        for &q in &[5.0, 11.0, 23.0, 53.0, 101.0] {
            for &t in &[0.0, 1.0, 4.0, 15.0] {
                g.push((q, t));
            }
        }
        g
    }

    #[test]
    fn exponent_fit_examples() {
        let flat: Vec<_> = grid().into_iter().map(|(q, t)| (q, t, 2.0)).collect();
        let f = exponent_fit(&flat).unwrap();
        assert!(f.slope_q.abs() < 1e-12 && f.slope_t.abs() < 1e-12);
        let pure: Vec<_> = grid().into_iter().map(|(q, t)| (q, t, q.powf(0.375))).collect();
        let f = exponent_fit(&pure).unwrap();
        assert!((f.slope_q - 0.375).abs() < 1e-12);
        assert!(f.slope_t.abs() < 1e-12);
        assert!(exponent_fit(&pure[..7]).is_err());
        let one_t: Vec<_> = pure.iter().map(|&(q, _, l)| (q, 3.0, l)).collect();
        assert!(exponent_fit(&one_t).is_err());
    }
}
