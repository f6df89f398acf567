//! Hecke eigenform coefficients.
//!
//! Normalized coefficients A(n) = a(n) / n^{(k-1)/2} are generated from a
//! table of prime eigenvalues through the Hecke recursion and
//! multiplicativity. The module also carries the eta-product expansions used
//! as independent coefficient oracles, the local Euler-factor ratios
//! E_{l1,l2}(s), the constants b_{l1,l2}, and estimators of the
//! Rankin-Selberg constant.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::ntheory::{divisor_count, factorize, gcd, is_prime, is_squarefree};
use crate::regression::fit_line;
use crate::special::kernel_weight;
use crate::summation::{ComplexSum, NeumaierSum};

/// Largest coefficient table [`HeckeEigenform::materialize`] will build.
pub const MEMO_CAP: u64 = 10_000_000;

/// Largest `n_max` accepted by [`eta24_expansion`].
pub const ETA24_MAX: u64 = 100_000;

/// A holomorphic Hecke eigenform of even weight k >= 4, square-free level N
/// and trivial nebentypus.
#[derive(Debug, Clone)]
pub struct HeckeEigenform {
    name: String,
    weight: u32,
    level: u64,
    level_primes: Vec<u64>,
    /// Normalized prime eigenvalues A(p).
    prime_table: BTreeMap<u64, f64>,
    /// Every prime up to this bound is present in the table.
    prime_bound: u64,
    /// Materialized A(n) for 0 <= n < table.len(); entry 0 unused.
    table: Vec<f64>,
}

impl HeckeEigenform {
    /// Builds a form from raw (unnormalized) prime eigenvalues a(p).
    pub fn from_raw(
        name: impl Into<String>,
        weight: u32,
        level: u64,
        raw: impl IntoIterator<Item = (u64, f64)>,
    ) -> Result<Self> {
        if weight < 4 || weight % 2 != 0 {
            return Err(Error::invalid(format!(
                "weight must be even and at least 4, got {weight}"
            )));
        }
        if level == 0 || !is_squarefree(level) {
            return Err(Error::invalid(format!("level {level} is not square-free")));
        }
        let half = (weight as f64 - 1.0) / 2.0;
        let mut prime_table = BTreeMap::new();
        for (p, a) in raw {
            if !is_prime(p) {
                return Err(Error::invalid(format!("{p} in the eigenvalue table is not prime")));
            }
            if !a.is_finite() {
                return Err(Error::invalid(format!("eigenvalue for {p} is not finite")));
            }
            if prime_table.insert(p, a / (p as f64).powf(half)).is_some() {
                return Err(Error::invalid(format!("prime {p} listed twice")));
            }
        }
        let mut prime_bound = 1;
        for &p in prime_table.keys() {
            // Contiguous coverage: every prime below p must be present.
            let prev_ok = (prime_bound + 1..p).all(|q| !is_prime(q));
            if !prev_ok {
                break;
            }
            prime_bound = p;
        }
        Ok(Self {
            name: name.into(),
            weight,
            level,
            level_primes: factorize(level).primes().collect(),
            prime_table,
            prime_bound,
            table: vec![0.0, 1.0],
        })
    }

    /// Ramanujan's Delta (k = 12, N = 1) with prime eigenvalues up to
    /// `bound`, generated by the eta-product expansion and materialized.
    pub fn delta(bound: u64) -> Result<Self> {
        let tau = eta24_expansion(bound)?;
        let raw = (2..=bound)
            .filter(|&p| is_prime(p))
            .map(|p| (p, tau[p as usize] as f64));
        let mut f = Self::from_raw("delta", 12, 1, raw)?;
        f.materialize(bound)?;
        Ok(f)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn weight(&self) -> u32 {
        self.weight
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn level_primes(&self) -> &[u64] {
        &self.level_primes
    }

    /// Every prime up to this bound has an eigenvalue.
    pub fn prime_bound(&self) -> u64 {
        self.prime_bound
    }

    /// Largest n with a materialized coefficient.
    pub fn materialized(&self) -> u64 {
        self.table.len() as u64 - 1
    }

    /// Raw prime eigenvalues a(p), ascending by p.
    pub fn raw_prime_table(&self) -> Vec<(u64, f64)> {
        let half = (self.weight as f64 - 1.0) / 2.0;
        self.prime_table
            .iter()
            .map(|(&p, &a)| (p, a * (p as f64).powf(half)))
            .collect()
    }

    fn divides_level(&self, p: u64) -> bool {
        self.level % p == 0
    }

    /// Normalized A(p).
    pub fn prime_coefficient(&self, p: u64) -> Result<f64> {
        self.prime_table
            .get(&p)
            .copied()
            .ok_or(Error::TableExhausted(p))
    }

    /// A(p^r) by the Hecke recursion (or A(p)^r when p | N).
    pub fn prime_power_coefficient(&self, p: u64, r: u32) -> Result<f64> {
        if r == 0 {
            return Ok(1.0);
        }
        let ap = self.prime_coefficient(p)?;
        if self.divides_level(p) {
            return Ok(ap.powi(r as i32));
        }
        let (mut prev, mut cur) = (1.0, ap);
        for _ in 1..r {
            (prev, cur) = (cur, ap * cur - prev);
        }
        Ok(cur)
    }

    /// Normalized coefficient A(n).
    pub fn coefficient(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::invalid("coefficients are indexed from 1"));
        }
        if let Some(&v) = self.table.get(n as usize) {
            return Ok(v);
        }
        let mut acc = 1.0;
        for &(p, e) in factorize(n).factors() {
            acc *= self.prime_power_coefficient(p, e)?;
        }
        Ok(acc)
    }

    /// Materialized coefficients A(0..=n) (entry 0 is unused), after a
    /// successful [`materialize`](Self::materialize).
    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Fills the coefficient table up to `n_max` by a multiplicative sieve.
    ///
    /// Must be called before parallel sections that read coefficients in
    /// bulk. Fails if a needed prime is missing or the cap is exceeded.
    pub fn materialize(&mut self, n_max: u64) -> Result<()> {
        if n_max > MEMO_CAP {
            return Err(Error::CacheCap {
                requested: n_max,
                cap: MEMO_CAP,
            });
        }
        if n_max <= self.materialized() {
            return Ok(());
        }
        let n = n_max as usize;
        let mut spf = vec![0u32; n + 1];
        let mut primes: Vec<u32> = Vec::new();
        for i in 2..=n {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
            }
            let si = spf[i];
            for &p in &primes {
                let ip = i * p as usize;
                if p > si || ip > n {
                    break;
                }
                spf[ip] = p;
            }
        }
        let mut table = vec![0.0f64; n + 1];
        table[1] = 1.0;
        for i in 2..=n {
            let p = spf[i] as usize;
            let mut m = i;
            let mut pe = 1usize;
            while m % p == 0 {
                m /= p;
                pe *= p;
            }
            table[i] = if m == 1 {
                if pe == p {
                    self.prime_coefficient(p as u64)?
                } else if self.divides_level(p as u64) {
                    table[pe / p] * table[p]
                } else {
                    table[p] * table[pe / p] - table[pe / (p * p)]
                }
            } else {
                table[pe] * table[m]
            };
        }
        self.table = table;
        Ok(())
    }

    /// First n <= n_max with |A(n)| > d(n), if any.
    pub fn deligne_violation(&self, n_max: u64) -> Result<Option<u64>> {
        for n in 1..=n_max {
            if self.coefficient(n)?.abs() > divisor_count(n) as f64 {
                return Ok(Some(n));
            }
        }
        Ok(None)
    }

    /// Serializes the form in the eigenform file format.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# Hecke eigenform {}", self.name);
        let _ = writeln!(out, "name = \"{}\"", self.name);
        let _ = writeln!(out, "weight = {}", self.weight);
        let _ = writeln!(out, "level = {}", self.level);
        out.push_str("primes = [\n");
        for (p, a) in self.raw_prime_table() {
            let r = a.round();
            if (a - r).abs() < 1e-6 * a.abs().max(1.0) && r.abs() < 9.0e15 {
                let _ = writeln!(out, "  [{p}, {}],", r as i64);
            } else if (a - r).abs() < 1e-6 * a.abs().max(1.0) {
                let _ = writeln!(out, "  [{p}, \"{r:.0}\"],");
            } else {
                let _ = writeln!(out, "  [{p}, {a:e}],");
            }
        }
        out.push_str("]\n");
        out
    }

    /// Parses the eigenform file format.
    ///
    /// ```text
    /// weight = 4
    /// level = 6
    /// primes = [[2, -2], [3, -3], [5, 6], [7, -16]]
    /// ```
    /// Eigenvalues may be integers, floats or decimal strings (for values
    /// beyond the 64-bit integer range).
    pub fn parse(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct File {
            name: Option<String>,
            weight: Spanned<toml::Value>,
            level: Spanned<toml::Value>,
            primes: Spanned<Vec<Spanned<Vec<Spanned<toml::Value>>>>>,
        }
        let line_of = |offset: usize| text[..offset.min(text.len())].matches('\n').count() + 1;
        let file: File = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| line_of(s.start));
            let msg = e.message().to_string();
            let field = ["weight", "level", "primes"]
                .into_iter()
                .find(|f| msg.contains(f))
                .unwrap_or("document")
                .to_string();
            Error::Parse {
                line,
                field,
                message: msg,
            }
        })?;
        let as_int = |v: &Spanned<toml::Value>, field: &str| -> Result<i64> {
            v.get_ref().as_integer().ok_or_else(|| Error::Parse {
                line: line_of(v.span().start),
                field: field.into(),
                message: format!("expected an integer, found {}", v.get_ref().type_str()),
            })
        };
        let weight = as_int(&file.weight, "weight")?;
        let level = as_int(&file.level, "level")?;
        let field_err = |v: &Spanned<toml::Value>, field: String, message: String| Error::Parse {
            line: line_of(v.span().start),
            field,
            message,
        };
        if !(4..=1000).contains(&weight) || weight % 2 != 0 {
            return Err(field_err(
                &file.weight,
                "weight".into(),
                format!("weight must be an even integer >= 4, got {weight}"),
            ));
        }
        if level < 1 || !is_squarefree(level as u64) {
            return Err(field_err(
                &file.level,
                "level".into(),
                format!("level must be a square-free positive integer, got {level}"),
            ));
        }
        let mut raw = Vec::with_capacity(file.primes.get_ref().len());
        for (i, entry) in file.primes.get_ref().iter().enumerate() {
            let pair = entry.get_ref();
            let entry_err = |msg: String| Error::Parse {
                line: line_of(entry.span().start),
                field: format!("primes[{i}]"),
                message: msg,
            };
            if pair.len() != 2 {
                return Err(entry_err(format!(
                    "expected [p, a_p], found {} elements",
                    pair.len()
                )));
            }
            let p = match pair[0].get_ref().as_integer() {
                Some(p) if p >= 2 && is_prime(p as u64) => p as u64,
                _ => {
                    return Err(field_err(
                        &pair[0],
                        format!("primes[{i}][0]"),
                        "expected a prime".into(),
                    ))
                }
            };
            let a = match pair[1].get_ref() {
                toml::Value::Integer(v) => *v as f64,
                toml::Value::Float(v) => *v,
                toml::Value::String(s) => s.trim().parse::<f64>().map_err(|_| {
                    field_err(
                        &pair[1],
                        format!("primes[{i}][1]"),
                        format!("`{s}` is not a decimal number"),
                    )
                })?,
                other => {
                    return Err(field_err(
                        &pair[1],
                        format!("primes[{i}][1]"),
                        format!("expected a number, found {}", other.type_str()),
                    ))
                }
            };
            raw.push((p, a));
        }
        let name = file.name.unwrap_or_else(|| format!("k{weight}N{level}"));
        Self::from_raw(name, weight as u32, level as u64, raw).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::Parse {
                line: line_of(file.primes.span().start),
                field: "primes".into(),
                message: m,
            },
            other => other,
        })
    }

    /// Loads an eigenform file and materializes coefficients up to its
    /// prime bound.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut f = Self::parse(&text)?;
        let bound = f.prime_bound();
        f.materialize(bound)?;
        Ok(f)
    }
}

/// Shared Delta with eigenvalues to [`ETA24_MAX`], built once per process.
pub fn builtin_delta() -> Arc<HeckeEigenform> {
    static DELTA: OnceLock<Arc<HeckeEigenform>> = OnceLock::new();
    DELTA
        .get_or_init(|| Arc::new(HeckeEigenform::delta(ETA24_MAX).expect("delta expansion")))
        .clone()
}

/// Resolves a builtin form by name.
pub fn builtin(name: &str) -> Result<Arc<HeckeEigenform>> {
    match name {
        "delta" | "Delta" => Ok(builtin_delta()),
        other => Err(Error::invalid(format!(
            "unknown builtin form `{other}` (available: delta)"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Eta-product oracles

/// Coefficients of q prod_{m >= 1} (1 - q^m)^24, indexed by n (entry 0 is 0).
///
/// Uses eta^3 = q^{1/8} sum_n (-1)^n (2n+1) q^{n(n+1)/2} and seven sparse
/// multiplications, all in exact 128-bit integers.
pub fn eta24_expansion(n_max: u64) -> Result<Vec<i128>> {
    if n_max == 0 || n_max > ETA24_MAX {
        return Err(Error::invalid(format!(
            "eta24_expansion needs 1 <= n_max <= {ETA24_MAX}, got {n_max}"
        )));
    }
    let len = n_max as usize; // series in q^j for j < n_max, shifted by q^1
    let mut sparse: Vec<(usize, i128)> = Vec::new();
    let mut k = 0usize;
    while k * (k + 1) / 2 < len {
        let sign = if k % 2 == 0 { 1 } else { -1 };
        sparse.push((k * (k + 1) / 2, sign * (2 * k as i128 + 1)));
        k += 1;
    }
    let mut cube = vec![0i128; len];
    for &(e, v) in &sparse {
        cube[e] = v;
    }
    let mut acc = cube.clone();
    for _ in 1..8 {
        let mut next = vec![0i128; len];
        for &(e, v) in &sparse {
            for j in 0..len - e {
                let prod = acc[j].checked_mul(v).ok_or(Error::Overflow("eta24_expansion"))?;
                next[j + e] = next[j + e]
                    .checked_add(prod)
                    .ok_or(Error::Overflow("eta24_expansion"))?;
            }
        }
        acc = next;
    }
    let mut out = vec![0i128; len + 1];
    out[1..].copy_from_slice(&acc);
    Ok(out)
}

/// Coefficients of the eta quotient prod_d eta(d z)^{r_d} with integral
/// leading exponent, indexed by n (entry 0 is the q^0 coefficient).
///
/// Each eta(d z) factor is expanded by Euler's pentagonal theorem.
pub fn eta_product_expansion(factors: &[(u64, u32)], n_max: u64) -> Result<Vec<i128>> {
    let weight24: u64 = factors.iter().map(|&(d, r)| d * r as u64).sum();
    if weight24 % 24 != 0 {
        return Err(Error::invalid(
            "eta product leading exponent sum(d r)/24 is not an integer",
        ));
    }
    let shift = (weight24 / 24) as usize;
    let len = n_max as usize + 1;
    if shift >= len {
        return Ok(vec![0; len]);
    }
    let body = len - shift;
    let mut acc = vec![0i128; body];
    acc[0] = 1;
    for &(d, r) in factors {
        let mut sparse = vec![(0usize, 1i128)];
        for k in 1.. {
            let g1 = d as usize * (k * (3 * k - 1) / 2);
            if g1 >= body {
                break;
            }
            let sign = if k % 2 == 0 { 1 } else { -1 };
            sparse.push((g1, sign));
            let g2 = d as usize * (k * (3 * k + 1) / 2);
            if g2 < body {
                sparse.push((g2, sign));
            }
        }
        for _ in 0..r {
            let mut next = vec![0i128; body];
            for &(e, v) in &sparse {
                for j in 0..body - e {
                    next[j + e] = next[j + e]
                        .checked_add(acc[j].checked_mul(v).ok_or(Error::Overflow("eta product"))?)
                        .ok_or(Error::Overflow("eta product"))?;
                }
            }
            acc = next;
        }
    }
    let mut out = vec![0i128; len];
    out[shift..].copy_from_slice(&acc);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Euler-factor ratios

/// E_{l1,l2}(s) with its truncation depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerRatio {
    pub l1: u64,
    pub l2: u64,
    pub s: Complex64,
    pub value: Complex64,
    /// Number of terms kept in each local series.
    pub depth: usize,
}

const LOCAL_TAIL_TOL: f64 = 1e-14;
const LOCAL_MAX_TERMS: usize = 100_000;

/// Local ratio at p: sum_j A(p^{j+shift_num}) conj A(p^{j+shift_conj}) p^{-js}
/// over sum_j |A(p^j)|^2 p^{-js}.
fn local_ratio(
    f: &HeckeEigenform,
    p: u64,
    s: Complex64,
    shift_num: u32,
    shift_conj: u32,
) -> Result<(Complex64, usize)> {
    let pf = p as f64;
    let mut num = ComplexSum::new();
    let mut den = ComplexSum::new();
    // A(p^j) for consecutive j by the same recursion as prime_power_coefficient.
    let mut powers: Vec<f64> = vec![1.0, f.prime_coefficient(p)?];
    let mut j = 0usize;
    loop {
        while powers.len() < j + 2 {
            let r = powers.len() as u32;
            powers.push(f.prime_power_coefficient(p, r)?);
        }
        let w = (-s * (j as f64 * pf.ln())).exp();
        let a = powers[j + shift_num as usize];
        let b = powers[j + shift_conj as usize];
        num.add(w * a * b);
        den.add(w * powers[j] * powers[j]);
        j += 1;
        let tail = ((j + 2) as f64).powi(2) * pf.powf(-(j as f64) * s.re);
        if tail < LOCAL_TAIL_TOL {
            break;
        }
        if j >= LOCAL_MAX_TERMS {
            return Err(Error::invalid(format!(
                "local series at p = {p} did not reach tolerance for Re s = {}",
                s.re
            )));
        }
    }
    Ok((num.value() / den.value(), j))
}

/// E_{l1,l2}(s) = (sum_m A(l2 m) conj A(l1 m) m^{-s}) / (sum_m |A(m)|^2 m^{-s}),
/// computed as a product of the local ratios at l1 and l2.
pub fn euler_ratio(f: &HeckeEigenform, l1: u64, l2: u64, s: Complex64) -> Result<EulerRatio> {
    if l1 == l2 {
        return Err(Error::invalid("euler_ratio needs l1 != l2"));
    }
    if !(s.re > 0.0) {
        return Err(Error::invalid(format!("euler_ratio needs Re s > 0, got {s}")));
    }
    for l in [l1, l2] {
        if !is_prime(l) || gcd(l, f.level()) != 1 {
            return Err(Error::invalid(format!(
                "{l} must be a prime coprime to the level {}",
                f.level()
            )));
        }
    }
    let (r1, d1) = local_ratio(f, l1, s, 0, 1)?;
    let (r2, d2) = local_ratio(f, l2, s, 1, 0)?;
    Ok(EulerRatio {
        l1,
        l2,
        s,
        value: r1 * r2,
        depth: d1.max(d2),
    })
}

/// b_{l1,l2}: 1/l1 when l1 = l2, else E_{l1,l2}(1)/(l1 l2).
pub fn b_constant(f: &HeckeEigenform, l1: u64, l2: u64) -> Result<f64> {
    if gcd(l1 * l2, f.level()) != 1 {
        return Err(Error::invalid("b_constant needs l1 l2 coprime to the level"));
    }
    if l1 == l2 {
        return Ok(1.0 / l1 as f64);
    }
    let e = euler_ratio(f, l1, l2, Complex64::new(1.0, 0.0))?;
    Ok(e.value.re / (l1 * l2) as f64)
}

// ---------------------------------------------------------------------------
// Rankin-Selberg constant

/// Slope fit of D(x) = sum_m |A(m)|^2 m^{-1} V(m/x)^2 against log x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankinSelbergFit {
    pub c: f64,
    pub intercept: f64,
    pub fit_residual: f64,
    /// Set when the residual exceeds [`RS_RESIDUAL_FLAG`] times c.
    pub non_asymptotic: bool,
}

/// Relative residual above which a fit is flagged as non-asymptotic.
pub const RS_RESIDUAL_FLAG: f64 = 0.05;

/// D(x) = sum_{m <= 2.06 x} |A(m)|^2 m^{-1} V(m/x)^2.
pub fn smoothed_rankin_sum(f: &HeckeEigenform, x: f64) -> Result<f64> {
    let m_max = (2.06 * x).ceil() as u64;
    let mut acc = NeumaierSum::new();
    for m in 1..=m_max {
        let a = f.coefficient(m)?;
        let v = kernel_weight(m as f64 / x);
        acc.add(a * a / m as f64 * v * v);
    }
    Ok(acc.value())
}

/// Least-squares estimate of c from D(x) on `x_grid`.
pub fn rankin_selberg_constant(f: &HeckeEigenform, x_grid: &[f64]) -> Result<RankinSelbergFit> {
    if x_grid.len() < 4 {
        return Err(Error::invalid("x_grid needs at least 4 points"));
    }
    let lo = x_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x_grid.iter().copied().fold(0.0, f64::max);
    if !(lo > 0.0) || hi / lo < 10.0 {
        return Err(Error::invalid("x_grid must be positive and span a decade"));
    }
    let xs: Vec<f64> = x_grid.iter().map(|x| x.ln()).collect();
    let ys = x_grid
        .iter()
        .map(|&x| smoothed_rankin_sum(f, x))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_line(&xs, &ys)?;
    Ok(RankinSelbergFit {
        c: fit.slope,
        intercept: fit.intercept,
        fit_residual: fit.rms_residual,
        non_asymptotic: fit.rms_residual > RS_RESIDUAL_FLAG * fit.slope.abs(),
    })
}

/// Mean density (1/M) sum_{m <= M} |A(m)|^2, which tends to c.
pub fn rankin_selberg_density(f: &HeckeEigenform, m_max: u64) -> Result<f64> {
    let mut acc = NeumaierSum::new();
    for m in 1..=m_max {
        let a = f.coefficient(m)?;
        acc.add(a * a);
    }
    Ok(acc.value() / m_max as f64)
}

/// Pole-residue probe w * sum_m |A(m)|^2 m^{-1-w}, with the terms beyond
/// `m_max` replaced by their mean-density estimate c_M M^{-w}.
pub fn rankin_selberg_probe(f: &HeckeEigenform, w: f64, m_max: u64) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::invalid("probe needs w > 0"));
    }
    let mut acc = NeumaierSum::new();
    for m in 1..=m_max {
        let a = f.coefficient(m)?;
        acc.add(a * a * (m as f64).powf(-1.0 - w));
    }
    let density = rankin_selberg_density(f, m_max)?;
    Ok(w * acc.value() + density * (m_max as f64).powf(-w))
}

/// First-order extrapolation 2 P(w) - P(2w) of [`rankin_selberg_probe`],
/// which removes the term linear in w from the Laurent expansion at the pole.
pub fn rankin_selberg_probe_extrapolated(f: &HeckeEigenform, w: f64, m_max: u64) -> Result<f64> {
    Ok(2.0 * rankin_selberg_probe(f, w, m_max)? - rankin_selberg_probe(f, 2.0 * w, m_max)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delta() -> Arc<HeckeEigenform> {
        builtin_delta()
    }

    /// Brute-force q-expansion of q prod (1 - q^m)^24 by repeated dense
    /// multiplication with (1 - q^m).
    fn eta24_dense(n_max: usize) -> Vec<i128> {
        let mut poly = vec![0i128; n_max];
        poly[0] = 1;
        for m in 1..n_max {
            for _ in 0..24 {
                for j in (m..n_max).rev() {
                    poly[j] -= poly[j - m];
                }
            }
        }
        let mut out = vec![0i128; n_max + 1];
        out[1..].copy_from_slice(&poly);
        out
    }

    #[test]
    fn eta24_examples_and_dense_oracle() {
        let tau = eta24_expansion(200).unwrap();
        assert_eq!(tau[1], 1);
        assert_eq!(tau[2], -24);
        assert_eq!(tau[3], 252);
        assert_eq!(tau[6], tau[2] * tau[3]);
        assert_eq!(tau[12], -370944);
        assert_eq!(&tau[..], &eta24_dense(200)[..]);
        let general = eta_product_expansion(&[(1, 24)], 200).unwrap();
        assert_eq!(general, tau);
        assert!(eta24_expansion(ETA24_MAX + 1).is_err());
    }

    #[test]
    fn delta_coefficient_examples() {
        let f = delta();
        assert_eq!(f.coefficient(1).unwrap(), 1.0);
        let a2 = f.coefficient(2).unwrap();
        assert!((a2 + 0.530_330_085_9).abs() < 1e-10);
        assert!((a2 - (-24.0) * 2f64.powf(-5.5)).abs() < 1e-15);
        let a6 = f.coefficient(6).unwrap();
        assert!((a6 - a2 * f.coefficient(3).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn delta_matches_eta_oracle_to_ten_thousand() {
        let f = delta();
        let tau = eta24_expansion(10_000).unwrap();
        for n in 1..=10_000u64 {
            let oracle = tau[n as usize] as f64 / (n as f64).powf(5.5);
            let got = f.coefficient(n).unwrap();
            assert!(
                (got - oracle).abs() <= 1e-10 * oracle.abs().max(1e-300),
                "n={n} got={got} oracle={oracle}"
            );
        }
    }

    #[test]
    fn off_table_coefficients_use_factorization() {
        let f = delta();
        // 2^20 * 3 exceeds the materialized table.
        let n = (1u64 << 20) * 3;
        let direct = f.prime_power_coefficient(2, 20).unwrap() * f.coefficient(3).unwrap();
        assert_eq!(f.coefficient(n).unwrap(), direct);
        let big_prime = 1_000_003u64;
        assert_eq!(f.coefficient(big_prime), Err(Error::TableExhausted(big_prime)));
    }

    #[test]
    fn hecke_recursion_consistency() {
        let f = delta();
        for (&p, _) in f.prime_table.iter().take(2000) {
            let ap = f.prime_coefficient(p).unwrap();
            for r in 1..=20 {
                let lhs = ap * f.prime_power_coefficient(p, r).unwrap();
                let rhs = f.prime_power_coefficient(p, r + 1).unwrap()
                    + f.prime_power_coefficient(p, r - 1).unwrap();
                assert!((lhs - rhs).abs() < 1e-12, "p={p} r={r}");
            }
        }
    }

    #[test]
    fn multiplicativity_of_table() {
        let f = delta();
        for m in 1..300u64 {
            for n in 1..300u64 {
                if gcd(m, n) == 1 {
                    let lhs = f.coefficient(m * n).unwrap();
                    let rhs = f.coefficient(m).unwrap() * f.coefficient(n).unwrap();
                    assert!((lhs - rhs).abs() < 1e-13 * (1.0 + rhs.abs()));
                }
            }
        }
    }

    #[test]
    fn deligne_bound_for_delta() {
        assert_eq!(delta().deligne_violation(ETA24_MAX).unwrap(), None);
    }

    fn level6() -> HeckeEigenform {
        // eta(z)^2 eta(2z)^2 eta(3z)^2 eta(6z)^2: weight 4, level 6.
        let coeffs = eta_product_expansion(&[(1, 2), (2, 2), (3, 2), (6, 2)], 3000).unwrap();
        let raw = (2..=3000u64)
            .filter(|&p| is_prime(p))
            .map(|p| (p, coeffs[p as usize] as f64));
        let mut f = HeckeEigenform::from_raw("level6", 4, 6, raw).unwrap();
        f.materialize(3000).unwrap();
        f
    }

    #[test]
    fn level_six_form_matches_eta_quotient() {
        let f = level6();
        let coeffs = eta_product_expansion(&[(1, 2), (2, 2), (3, 2), (6, 2)], 3000).unwrap();
        assert_eq!(coeffs[1], 1);
        // Bad primes: a(p) = +-p^{k/2-1}.
        assert_eq!(coeffs[2].abs(), 2);
        assert_eq!(coeffs[3].abs(), 3);
        for n in 1..=3000u64 {
            let oracle = coeffs[n as usize] as f64 / (n as f64).powf(1.5);
            assert!((f.coefficient(n).unwrap() - oracle).abs() < 1e-12 * (1.0 + oracle.abs()));
        }
        assert_eq!(f.deligne_violation(3000).unwrap(), None);
    }

    #[test]
    fn file_round_trip_and_errors() {
        let f = level6();
        let text = f.to_file_string();
        let g = HeckeEigenform::parse(&text).unwrap();
        assert_eq!(g.weight(), 4);
        assert_eq!(g.level(), 6);
        assert_eq!(g.prime_bound(), f.prime_bound());
        for n in [1u64, 2, 3, 35, 997, 2999] {
            assert!((g.coefficient(n).unwrap() - f.coefficient(n).unwrap()).abs() < 1e-15);
        }
        let big = "weight = 12\nlevel = 1\nprimes = [[2, -24], [3, \"252\"], [5, 4830.0]]\n";
        let d = HeckeEigenform::parse(big).unwrap();
        assert!((d.coefficient(15).unwrap() - delta().coefficient(15).unwrap()).abs() < 1e-15);

        let bad_weight = "weight = 3\nlevel = 1\nprimes = []\n";
        match HeckeEigenform::parse(bad_weight) {
            Err(Error::Parse { line: 1, field, .. }) => assert_eq!(field, "weight"),
            other => panic!("unexpected {other:?}"),
        }
        let bad_level = "weight = 4\nlevel = 12\nprimes = []\n";
        match HeckeEigenform::parse(bad_level) {
            Err(Error::Parse { line: 2, field, .. }) => assert_eq!(field, "level"),
            other => panic!("unexpected {other:?}"),
        }
        let bad_entry = "weight = 4\nlevel = 1\nprimes = [\n  [2, 1],\n  [4, 1],\n]\n";
        match HeckeEigenform::parse(bad_entry) {
            Err(Error::Parse { line: 5, field, .. }) => assert_eq!(field, "primes[1][0]"),
            other => panic!("unexpected {other:?}"),
        }
        let bad_value = "weight = 4\nlevel = 1\nprimes = [\n  [2, \"abc\"],\n]\n";
        match HeckeEigenform::parse(bad_value) {
            Err(Error::Parse { line: 4, field, .. }) => assert_eq!(field, "primes[0][1]"),
            other => panic!("unexpected {other:?}"),
        }
        let missing = "weight = 4\nlevel = 1\n";
        assert!(matches!(HeckeEigenform::parse(missing), Err(Error::Parse { .. })));
    }

    #[test]
    fn missing_prime_names_the_prime() {
        let f = HeckeEigenform::from_raw("gap", 4, 1, [(2, 1.0), (5, 2.0)]).unwrap();
        assert_eq!(f.prime_bound(), 2);
        assert_eq!(f.coefficient(6), Err(Error::TableExhausted(3)));
        let mut g = f.clone();
        assert_eq!(g.materialize(10), Err(Error::TableExhausted(3)));
        assert!(matches!(g.materialize(MEMO_CAP + 1), Err(Error::CacheCap { .. })));
    }

    fn smooth_series_ratio(f: &HeckeEigenform, l1: u64, l2: u64, s: f64) -> f64 {
        crate::oracle::euler_ratio_smooth_series(f, l1, l2, s).unwrap()
    }

    #[test]
    fn euler_ratio_examples() {
        let f = delta();
        let s2 = Complex64::new(2.0, 0.0);
        let e23 = euler_ratio(&f, 2, 3, s2).unwrap();
        let oracle = smooth_series_ratio(&f, 2, 3, 2.0);
        assert!((e23.value.re - oracle).abs() < 1e-12 * oracle.abs());
        let e32 = euler_ratio(&f, 3, 2, s2).unwrap();
        assert!((e32.value.re - smooth_series_ratio(&f, 3, 2, 2.0)).abs() < 1e-12);
        // Large Re s: leading terms dominate.
        let big = euler_ratio(&f, 2, 3, Complex64::new(60.0, 0.0)).unwrap();
        let lead = f.coefficient(3).unwrap() * f.coefficient(2).unwrap();
        assert!((big.value.re - lead).abs() < 1e-14);
        assert!(euler_ratio(&f, 3, 3, s2).is_err());
        assert!(euler_ratio(&f, 2, 3, Complex64::new(0.0, 1.0)).is_err());
    }

    #[test]
    fn euler_ratio_matches_truncated_full_series() {
        // The unrestricted series converges like M^{1 - Re s}; at M = 10^5
        // the ratio agrees to about 1e-4.
        let f = delta();
        let m_max = 100_000 / 3;
        let mut num = NeumaierSum::new();
        let mut den = NeumaierSum::new();
        for m in 1..=m_max {
            let w = (m as f64).powi(-2);
            num.add(f.coefficient(3 * m).unwrap() * f.coefficient(2 * m).unwrap() * w);
            den.add(f.coefficient(m).unwrap().powi(2) * w);
        }
        let brute = num.value() / den.value();
        let e = euler_ratio(&f, 2, 3, Complex64::new(2.0, 0.0)).unwrap().value.re;
        assert!((brute - e).abs() < 1e-4 * e.abs().max(1e-3), "brute={brute} e={e}");
    }

    #[test]
    fn b_constant_examples() {
        let f = delta();
        assert_eq!(b_constant(&f, 3, 3).unwrap(), 1.0 / 3.0);
        assert_eq!(b_constant(&f, 7, 7).unwrap(), 1.0 / 7.0);
        let e = euler_ratio(&f, 2, 3, Complex64::new(1.0, 0.0)).unwrap();
        assert!((b_constant(&f, 2, 3).unwrap() - e.value.re / 6.0).abs() < 1e-16);
    }

    #[test]
    fn rankin_selberg_estimates_agree() {
        let f = delta();
        let grid = [1e2, 10f64.powf(2.5), 1e3, 10f64.powf(3.5), 1e4];
        let fit = rankin_selberg_constant(&f, &grid).unwrap();
        assert!(fit.c > 0.0);
        let doubled: Vec<f64> = grid.iter().map(|x| 2.0 * x).collect();
        let fit2 = rankin_selberg_constant(&f, &doubled).unwrap();
        assert!((fit2.c / fit.c - 1.0).abs() < 0.05);
        let probe = rankin_selberg_probe_extrapolated(&f, 0.05, ETA24_MAX).unwrap();
        assert!((probe / fit.c - 1.0).abs() < 0.01, "probe={probe} fit={}", fit.c);
        let density = rankin_selberg_density(&f, ETA24_MAX).unwrap();
        assert!((density / fit.c - 1.0).abs() < 0.01);
        // The raw probe carries a bias linear in w.
        let p1 = rankin_selberg_probe(&f, 0.025, ETA24_MAX).unwrap();
        let p2 = rankin_selberg_probe(&f, 0.05, ETA24_MAX).unwrap();
        let p4 = rankin_selberg_probe(&f, 0.1, ETA24_MAX).unwrap();
        assert!(p1 > fit.c && p2 > p1 && p4 > p2);
        assert!(((p4 - p2) / (p2 - p1) - 2.0).abs() < 0.05);
        assert!(rankin_selberg_constant(&f, &grid[..3]).is_err());
        assert!(rankin_selberg_constant(&f, &[100.0, 200.0, 300.0, 400.0]).is_err());
    }
}
