//! Explicit objects around the shifted convolution series Z_Q: its direct
//! evaluation with a certified tail bound, the closed form of the limiting
//! M function and its residues c_r, and the Eisenstein constant kappa.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Pow, Zero};

use crate::error::{Error, Result};
use crate::forms::HeckeEigenform;
use crate::lfunc::divisor_bound_constant;
use crate::ntheory::{factorize, gcd, inv_mod, is_squarefree};
use crate::special::complex_gamma;
use crate::summation::{par_blocks_multi, ComplexSum};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

// ---------------------------------------------------------------------------
// Z_Q by direct summation

/// A point (s, w) and the data of one shifted convolution series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedConvolutionPoint {
    pub s: Complex64,
    pub w: Complex64,
    pub l1: u64,
    pub l2: u64,
    pub q: u64,
    pub m_max: u64,
    pub h_max: u64,
}

/// A truncated value of Z_Q with its tail bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ZqValue {
    pub value: Complex64,
    pub tail_bound: f64,
    pub terms: u64,
    pub note: Option<String>,
}

/// Largest number of (h0, m2) pairs a single evaluation may visit.
pub const ZQ_MAX_PAIRS: u64 = 2_000_000_000;

/// Truncated Z_Q(s, w) = sum over h0 <= h_max, m2 <= m_max with
/// l1 | m2 l2 + h0 Q of A(m1) A(m2) (1 + h0 Q/(l2 m2))^{(k-1)/2}
/// (l2 m2)^{-s} (h0 Q)^{-w-(k-1)/2}, m1 = (m2 l2 + h0 Q)/l1.
///
/// Requires Re s > 2 and Re w > 1. The tail bound covers every pair
/// outside the (m_max, h_max) box.
pub fn z_q_direct(pt: &ShiftedConvolutionPoint, f: &HeckeEigenform) -> Result<ZqValue> {
    let (sigma, omega) = (pt.s.re, pt.w.re);
    if !(sigma > 2.0) {
        return Err(Error::invalid(format!("z_q_direct needs Re s > 2, got {}", pt.s)));
    }
    if !(omega > 1.0) {
        return Err(Error::invalid(format!(
            "z_q_direct needs Re w > 1 for absolute convergence, got {}",
            pt.w
        )));
    }
    for l in [pt.l1, pt.l2] {
        if !crate::ntheory::is_prime(l) {
            return Err(Error::invalid(format!("{l} is not prime")));
        }
    }
    if pt.q == 0 || pt.m_max == 0 || pt.h_max == 0 {
        return Err(Error::invalid("Q, m_max and h_max must be positive"));
    }
    if pt.m_max.saturating_mul(pt.h_max) / pt.l1 > ZQ_MAX_PAIRS {
        return Err(Error::TruncationOverflow(format!(
            "({}, {}) truncation exceeds {ZQ_MAX_PAIRS} pairs",
            pt.m_max, pt.h_max
        )));
    }
    let kappa = (f.weight() as f64 - 1.0) / 2.0;
    let (l1, l2, q) = (pt.l1, pt.l2, pt.q);
    // Per-m2 and per-h0 factors.
    let m_pow: Vec<Complex64> = (0..=pt.m_max)
        .map(|m| if m == 0 { c(0.0, 0.0) } else { (-pt.s * ((l2 * m) as f64).ln()).exp() })
        .collect();
    let h_pow: Vec<Complex64> = (0..=pt.h_max)
        .map(|h| {
            if h == 0 {
                c(0.0, 0.0)
            } else {
                (-(pt.w + kappa) * ((h * q) as f64).ln()).exp()
            }
        })
        .collect();
    let m2_coeff: Vec<f64> = (0..=pt.m_max)
        .map(|m| if m == 0 { Ok(0.0) } else { f.coefficient(m) })
        .collect::<Result<_>>()?;
    // Residue of m2 mod l1 solving m2 l2 = -h0 Q (mod l1); when l1 | l2 the
    // congruence reads l1 | h0 Q and leaves m2 free.
    let l2_inv = inv_mod(l2 % l1, l1);
    let out = par_blocks_multi(pt.h_max as usize, 256, 2, |lo, hi, acc| {
        for idx in lo..hi {
            let h0 = idx as u64 + 1;
            let hq = h0 * q;
            let (start, step) = match l2_inv {
                Some(inv) => {
                    let r = ((l1 - hq % l1) % l1) * inv % l1;
                    (if r == 0 { l1 } else { r }, l1)
                }
                None => {
                    if hq % l1 != 0 {
                        continue;
                    }
                    (1, 1)
                }
            };
            let mut row = ComplexSum::new();
            let mut count = 0u64;
            let mut m2 = start;
            while m2 <= pt.m_max {
                let a2 = m2_coeff[m2 as usize];
                if a2 != 0.0 {
                    let base = l2 * m2;
                    let m1 = (base + hq) / l1;
                    let a1 = f.coefficient(m1).unwrap_or(f64::NAN);
                    let growth = ((hq as f64) / base as f64).ln_1p() * kappa;
                    row.add(m_pow[m2 as usize] * (a1 * a2 * growth.exp()));
                    count += 1;
                }
                m2 += step;
            }
            acc[0].add(row.value() * h_pow[h0 as usize]);
            acc[1].add(c(count as f64, 0.0));
        }
    });
    let value = out[0].value();
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::invalid("coefficient lookup failed inside z_q_direct"));
    }
    let terms = out[1].value().re.round() as u64;
    let note = (terms == 0).then(|| "no (h0, m2) pair satisfies the divisibility condition".to_string());
    Ok(ZqValue {
        value,
        tail_bound: z_q_tail_bound(pt, kappa),
        terms,
        note,
    })
}

/// Bound for the part of Z_Q outside the (m_max, h_max) box.
///
/// Uses |A(n)| <= d(n) <= C_e n^e, m1 <= l2 m2 + h0 Q, subadditivity of
/// n^e, and (a+b)^k <= max(1, 2^{k-1}) (a^k + b^k). Each of the four
/// resulting separable majorants c m^{-a} h^{-b} is summed over
/// {m > M} x {h >= 1} and {m >= 1} x {h > H}.
pub fn z_q_tail_bound(pt: &ShiftedConvolutionPoint, kappa: f64) -> f64 {
    let (sigma, omega) = (pt.s.re, pt.w.re);
    let eps = ((sigma - 1.0) / 4.0).min((omega - 1.0) / 2.0).min(0.25);
    let ce = divisor_bound_constant(eps);
    let ck = 1f64.max(2f64.powf(kappa - 1.0));
    let (l2, q) = (pt.l2 as f64, pt.q as f64);
    let (mm, hh) = (pt.m_max as f64, pt.h_max as f64);
    // sum_{n > N} n^{-a} <= N^{1-a}/(a-1); sum_{n >= 1} n^{-a} <= a/(a-1).
    let tail = |n: f64, a: f64| n.powf(1.0 - a) / (a - 1.0);
    let full = |a: f64| a / (a - 1.0);
    // (m exponent, h exponent, constant from powers of l2 and Q)
    let pieces = [
        (sigma - 2.0 * eps, omega + kappa, l2.powf(eps - sigma) * q.powf(-omega - kappa)),
        (sigma + kappa - 2.0 * eps, omega, l2.powf(eps - sigma - kappa) * q.powf(-omega)),
        (sigma - eps, omega + kappa - eps, l2.powf(-sigma) * q.powf(eps - omega - kappa)),
        (sigma + kappa - eps, omega - eps, l2.powf(-sigma - kappa) * q.powf(eps - omega)),
    ];
    let mut total = 0.0;
    for (a, b, k) in pieces {
        total += k * (tail(mm, a) * full(b) + full(a) * tail(hh, b));
    }
    ck * ce * ce * total
}

// ---------------------------------------------------------------------------
// The limiting M function and its residues

const POLE_DISTANCE: f64 = 1e-6;

/// Distance from `z` to the nearest pole 0, -1, -2, ... of Gamma.
fn gamma_pole_distance(z: Complex64) -> f64 {
    if z.re > 0.5 {
        return z.norm();
    }
    let n = z.re.round().min(0.0);
    (z - c(n, 0.0)).norm()
}

fn gamma_checked(z: Complex64, factor: &'static str, min_distance: f64) -> Result<Complex64> {
    if gamma_pole_distance(z) < min_distance {
        return Err(Error::Pole {
            function: factor,
            at: format!("{z}"),
        });
    }
    complex_gamma(z)
}

/// sqrt(pi) 2^{1/2-s} Gamma(s-1/2+z) Gamma(s-1/2-z) Gamma(1-s)
/// / (Gamma(1/2+z) Gamma(1/2-z)).
///
/// The formula is evaluated wherever finite; the region
/// Re(s+z) <= 1/2 + max(0, |Re z|) where it represents the limit is
/// reported by [`m_closed_form_in_region`] and not enforced.
pub fn m_closed_form(s: Complex64, z: Complex64) -> Result<Complex64> {
    let half = c(0.5, 0.0);
    let g1 = gamma_checked(s - half + z, "Gamma(s-1/2+z)", POLE_DISTANCE)?;
    let g2 = gamma_checked(s - half - z, "Gamma(s-1/2-z)", POLE_DISTANCE)?;
    let g3 = gamma_checked(c(1.0, 0.0) - s, "Gamma(1-s)", POLE_DISTANCE)?;
    let d1 = gamma_checked(half + z, "Gamma(1/2+z)", POLE_DISTANCE)?;
    let d2 = gamma_checked(half - z, "Gamma(1/2-z)", POLE_DISTANCE)?;
    let two_pow = ((half - s) * std::f64::consts::LN_2).exp();
    Ok(std::f64::consts::PI.sqrt() * two_pow * g1 * g2 * g3 / (d1 * d2))
}

/// Whether (s, z) lies in the region Re(s+z) <= 1/2 + max(0, |Re z|).
pub fn m_closed_form_in_region(s: Complex64, z: Complex64) -> bool {
    (s + z).re <= 0.5 + z.re.abs().max(0.0)
}

/// Branch of the residue c_r(+z) or c_r(-z).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// Special values of c_r at the point where the branch argument is +1/2 or -1/2.
pub fn c_r_special(r: u32, at_plus_half: bool) -> f64 {
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
    if at_plus_half {
        if r == 0 {
            (std::f64::consts::PI / 2.0).sqrt()
        } else {
            2f64.powf(r as f64 - 0.5) * sqrt_pi / (2.0 * fact(r))
        }
    } else {
        -(2f64.powf(r as f64 + 0.5)) * sqrt_pi / (2.0 * fact(r + 1))
    }
}

/// Residue of the closed-form M at s = 1/2 +- z - r:
/// (-1)^r sqrt(pi) 2^{-+z+r} Gamma(+-2z - r) Gamma(1/2 -+ z + r)
/// / (r! Gamma(1/2+z) Gamma(1/2-z)).
///
/// When the branch argument +-z equals +-1/2 (within 1e-12) the tabulated
/// limits are returned.
pub fn c_r_residue(r: u32, z: Complex64, sign: Sign) -> Result<Complex64> {
    let zz = match sign {
        Sign::Plus => z,
        Sign::Minus => -z,
    };
    if (zz - c(0.5, 0.0)).norm() < 1e-12 {
        return Ok(c(c_r_special(r, true), 0.0));
    }
    if (zz + c(0.5, 0.0)).norm() < 1e-12 {
        return Ok(c(c_r_special(r, false), 0.0));
    }
    let rf = r as f64;
    let half = c(0.5, 0.0);
    let n1 = gamma_checked(zz * 2.0 - rf, "Gamma(+-2z-r)", 1e-12)?;
    let n2 = gamma_checked(half - zz + rf, "Gamma(1/2-+z+r)", 1e-12)?;
    // A pole of the denominator makes the residue vanish.
    let recip = |x: Complex64| -> Result<Complex64> {
        if gamma_pole_distance(x) < 1e-12 {
            Ok(c(0.0, 0.0))
        } else {
            Ok(complex_gamma(x)?.inv())
        }
    };
    let fact: f64 = (1..=r).map(|k| k as f64).product();
    let sgn = if r % 2 == 0 { 1.0 } else { -1.0 };
    let two_pow = ((c(rf, 0.0) - zz) * std::f64::consts::LN_2).exp();
    Ok(sgn * std::f64::consts::PI.sqrt() * two_pow * n1 * n2 * recip(half + z)? * recip(half - z)? / fact)
}

// ---------------------------------------------------------------------------
// kappa

/// Level, cusp 1/w, modulus and arguments of kappa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaParams {
    pub level: u64,
    pub w: u64,
    pub q: u64,
    pub s_prime: Complex64,
    pub z: Complex64,
}

fn validate_kappa(level: u64, w: u64, q: u64) -> Result<()> {
    if level == 0 || q == 0 || w == 0 {
        return Err(Error::invalid("N, w and Q must be positive"));
    }
    if !is_squarefree(level) {
        return Err(Error::invalid(format!("level {level} is not squarefree")));
    }
    if level % w != 0 {
        return Err(Error::invalid(format!("w = {w} does not divide N = {level}")));
    }
    if gcd(q, level) != 1 {
        return Err(Error::invalid(format!("gcd(Q, N) != 1 for Q = {q}, N = {level}")));
    }
    Ok(())
}

const KAPPA_SINGULAR: f64 = 1e-9;

/// The Euler-product expression
/// Q^{-(s'+z)} (1/(wN))^{1/2-z} prod_{p|N} (1-p^{-(1-2z)})^{-1}
/// prod_{p|N/w} (1-p^{-(s'-z)}) prod_{p|w} (-1+p^{1-(s'+z)})
/// prod_{p^g||Q} (1-p^{2z})^{-1} ((1-p^{-(s'-z)}) - p^{2(g+1)z} (1-p^{-(s'+z)})),
/// i.e. kappa_{1/w,Q}(s', -z).
///
/// For p | N/w with s' - z = 1 - 2z the two p-factors cancel identically and
/// are dropped, which makes the line s' = 1 - z regular at z = 1/2.
pub fn kappa(p: &KappaParams) -> Result<Complex64> {
    validate_kappa(p.level, p.w, p.q)?;
    let (s, z) = (p.s_prime, p.z);
    let one = c(1.0, 0.0);
    let pw = |base: u64, e: Complex64| (e * (base as f64).ln()).exp();
    let cancel = (s - z - (one - z * 2.0)).norm() == 0.0;
    let mut val = pw(p.q, -(s + z)) * pw(p.w * p.level, -(c(0.5, 0.0) - z));
    let n_over_w = p.level / p.w;
    for pr in factorize(p.level).primes() {
        let in_n_over_w = n_over_w % pr == 0;
        if in_n_over_w && cancel {
            continue;
        }
        let den = one - pw(pr, -(one - z * 2.0));
        if den.norm() < KAPPA_SINGULAR {
            return Err(Error::Singular {
                factor: format!("(1 - {pr}^(-(1-2z)))^-1"),
                detail: format!("z = {z}"),
            });
        }
        val /= den;
        if in_n_over_w {
            val *= one - pw(pr, -(s - z));
        } else {
            val *= -one + pw(pr, one - (s + z));
        }
    }
    for &(pr, g) in factorize(p.q).factors() {
        let den = one - pw(pr, z * 2.0);
        if den.norm() < KAPPA_SINGULAR {
            return Err(Error::Singular {
                factor: format!("(1 - {pr}^(2z))^-1"),
                detail: format!("z = {z}"),
            });
        }
        let num = (one - pw(pr, -(s - z))) - pw(pr, z * (2.0 * (g as f64 + 1.0))) * (one - pw(pr, -(s + z)));
        val *= num / den;
    }
    Ok(val)
}

fn rat_pow(base: u64, e: Rational64) -> Result<BigRational> {
    if *e.denom() != 1 {
        return Err(Error::invalid(format!(
            "exponent {e} of {base} is not an integer; no exact rational value"
        )));
    }
    let b = BigRational::from_integer(BigInt::from(base));
    let k = *e.numer();
    let k32 = i32::try_from(k).map_err(|_| Error::Overflow("kappa exponent"))?;
    Ok(Pow::pow(b, k32))
}

/// Exact value of [`kappa`] for rational s', z making every factor rational
/// (s' and z in 1/2 + Z).
pub fn kappa_exact(level: u64, w: u64, q: u64, s_prime: Rational64, z: Rational64) -> Result<BigRational> {
    validate_kappa(level, w, q)?;
    let one_r = Rational64::from_integer(1);
    let half = Rational64::new(1, 2);
    let one = BigRational::one();
    let cancel = s_prime - z == one_r - z * 2;
    let mut val = rat_pow(q, -(s_prime + z))? * rat_pow(w * level, -(half - z))?;
    let n_over_w = level / w;
    for pr in factorize(level).primes() {
        let in_n_over_w = n_over_w % pr == 0;
        if in_n_over_w && cancel {
            continue;
        }
        let den = &one - rat_pow(pr, -(one_r - z * 2))?;
        if den.is_zero() {
            return Err(Error::Singular {
                factor: format!("(1 - {pr}^(-(1-2z)))^-1"),
                detail: format!("z = {z}"),
            });
        }
        val /= den;
        if in_n_over_w {
            val *= &one - rat_pow(pr, -(s_prime - z))?;
        } else {
            val *= rat_pow(pr, one_r - (s_prime + z))? - &one;
        }
    }
    for &(pr, g) in factorize(q).factors() {
        let den = &one - rat_pow(pr, z * 2)?;
        if den.is_zero() {
            return Err(Error::Singular {
                factor: format!("(1 - {pr}^(2z))^-1"),
                detail: format!("z = {z}"),
            });
        }
        let num = (&one - rat_pow(pr, -(s_prime - z))?)
            - rat_pow(pr, z * 2 * (g as i64 + 1))? * (&one - rat_pow(pr, -(s_prime + z))?);
        val *= num / den;
    }
    Ok(val)
}

/// prod_{p | N} 1/(p+1) as an exact rational.
pub fn kappa_half_half_expected(level: u64) -> BigRational {
    factorize(level)
        .primes()
        .map(|p| BigRational::new(BigInt::from(1), BigInt::from(p + 1)))
        .fold(BigRational::one(), |a, b| a * b)
}

/// One row of [`kappa_bound_probe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaProbeRow {
    pub q: u64,
    /// max over the grid of |kappa(1/2, -z)| Q^{1/2}.
    pub scaled_sup: f64,
}

/// sup_z |kappa_{1/w,Q}(1/2, -z)| Q^{1/2} over a grid on Re z = 0.
pub fn kappa_bound_probe(level: u64, w: u64, q: u64, grid: &[f64]) -> Result<KappaProbeRow> {
    if grid.is_empty() {
        return Err(Error::invalid("kappa_bound_probe needs a nonempty grid"));
    }
    let mut sup: f64 = 0.0;
    for &y in grid {
        if y.abs() < 1e-3 {
            return Err(Error::invalid(format!("grid point {y} is within 1e-3 of z = 0")));
        }
        let v = kappa(&KappaParams {
            level,
            w,
            q,
            s_prime: c(0.5, 0.0),
            z: c(0.0, y),
        })?;
        sup = sup.max(v.norm());
    }
    Ok(KappaProbeRow {
        q,
        scaled_sup: sup * (q as f64).sqrt(),
    })
}

/// V_N = pi [SL_2(Z) : Gamma_0(N)] / 3 = pi N prod_{p|N} (1 + 1/p) / 3.
pub fn volume_scalar(level: u64) -> f64 {
    let index: f64 = factorize(level)
        .primes()
        .map(|p| 1.0 + 1.0 / p as f64)
        .product::<f64>()
        * level as f64;
    std::f64::consts::PI * index / 3.0
}
