//! Exact integer number theory: factorization, divisor function, totient,
//! primitive roots and modular arithmetic.
//!
//! Factorization uses a smallest-prime-factor sieve up to [`SIEVE_LIMIT`].
//! Larger inputs are stripped of small primes by trial division and the
//! cofactor is split with Pollard's rho, each piece certified by a
//! deterministic Miller-Rabin test.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Upper end of the precomputed sieve.
pub const SIEVE_LIMIT: u32 = 1_000_000;

struct Sieve {
    spf: Vec<u32>,
    primes: Vec<u32>,
}

fn sieve() -> &'static Sieve {
    static SIEVE: OnceLock<Sieve> = OnceLock::new();
    SIEVE.get_or_init(|| {
        let n = SIEVE_LIMIT as usize;
        let mut spf = vec![0u32; n + 1];
        let mut primes = Vec::new();
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
        Sieve { spf, primes }
    })
}

/// All primes up to [`SIEVE_LIMIT`], ascending.
pub fn sieved_primes() -> &'static [u32] {
    &sieve().primes
}

/// Prime factorization as ascending (prime, exponent) pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Factorization {
    factors: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }

    /// Exponent of `p` in the factored integer (0 if absent).
    pub fn exponent_of(&self, p: u64) -> u32 {
        self.factors
            .iter()
            .find(|&&(q, _)| q == p)
            .map_or(0, |&(_, e)| e)
    }

    /// Reassembles the integer, failing on overflow.
    pub fn value(&self) -> Result<u64> {
        let mut n: u64 = 1;
        for &(p, e) in &self.factors {
            let pe = p.checked_pow(e).ok_or(Error::Overflow("Factorization::value"))?;
            n = n.checked_mul(pe).ok_or(Error::Overflow("Factorization::value"))?;
        }
        Ok(n)
    }
}

/// Factors `n >= 1`; `1` gives the empty factorization.
///
/// # Panics
/// Panics if `n == 0`.
pub fn factorize(n: u64) -> Factorization {
    assert!(n >= 1, "factorize requires n >= 1");
    let s = sieve();
    let mut factors: Vec<(u64, u32)> = Vec::new();
    let mut m = n;
    if m > SIEVE_LIMIT as u64 {
        for &p in s.primes.iter().take(TRIAL_PRIMES) {
            let p = p as u64;
            if m % p == 0 {
                let mut e = 0;
                while m % p == 0 {
                    m /= p;
                    e += 1;
                }
                factors.push((p, e));
            }
        }
    }
    let mut stack = vec![m];
    while let Some(c) = stack.pop() {
        if c == 1 {
            continue;
        }
        if c <= SIEVE_LIMIT as u64 {
            let mut c = c;
            while c > 1 {
                let p = s.spf[c as usize] as u64;
                let mut e = 0;
                while c % p == 0 {
                    c /= p;
                    e += 1;
                }
                add_factor(&mut factors, p, e);
            }
        } else if is_prime(c) {
            add_factor(&mut factors, c, 1);
        } else {
            let d = pollard_rho(c);
            stack.push(d);
            stack.push(c / d);
        }
    }
    factors.sort_unstable();
    Factorization { factors }
}

/// Number of small primes removed by trial division before splitting the
/// cofactor of a large input.
const TRIAL_PRIMES: usize = 168;

fn add_factor(factors: &mut Vec<(u64, u32)>, p: u64, e: u32) {
    match factors.iter_mut().find(|(q, _)| *q == p) {
        Some(entry) => entry.1 += e,
        None => factors.push((p, e)),
    }
}

#[inline]
fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

/// `base^exp mod m` for `m >= 1`.
pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for all 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n <= SIEVE_LIMIT as u64 {
        return sieve().spf[n as usize] as u64 == n;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if BASES.iter().any(|&b| n % b == 0) {
        return false;
    }
    let mut d = n - 1;
    let mut r = 0;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Nontrivial factor of a composite `n` (Pollard's rho, Floyd cycle search).
fn pollard_rho(n: u64) -> u64 {
    if n % 2 == 0 {
        return 2;
    }
    let mut c = 1u64;
    loop {
        let f = |x: u64| ((mul_mod(x, x, n) as u128 + c as u128) % n as u128) as u64;
        let (mut x, mut y, mut d) = (2u64, 2u64, 1u64);
        while d == 1 {
            x = f(x);
            y = f(f(y));
            d = gcd(x.abs_diff(y), n);
        }
        if d != n {
            return d;
        }
        c += 1;
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Least common multiple, failing on overflow.
pub fn lcm(a: u64, b: u64) -> Result<u64> {
    if a == 0 || b == 0 {
        return Ok(0);
    }
    (a / gcd(a, b))
        .checked_mul(b)
        .ok_or(Error::Overflow("lcm"))
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let (mut old_r, mut r) = (a as i128 % m as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u64)
}

/// Chinese remainder: the unique `x mod m1*m2` with `x = r1 (m1)` and
/// `x = r2 (m2)`, for coprime moduli.
pub fn crt(r1: u64, m1: u64, r2: u64, m2: u64) -> Result<u64> {
    let m = m1.checked_mul(m2).ok_or(Error::Overflow("crt"))?;
    let inv = inv_mod(m1 % m2, m2)
        .ok_or_else(|| Error::invalid(format!("crt moduli {m1} and {m2} are not coprime")))?;
    let diff = (r2 % m2 + m2 - r1 % m2) % m2;
    let k = mul_mod(diff, inv, m2);
    Ok(((r1 % m1) as u128 + k as u128 * m1 as u128) as u64 % m)
}

/// Number of positive divisors.
pub fn divisor_count(n: u64) -> u64 {
    factorize(n).factors().iter().map(|&(_, e)| e as u64 + 1).product()
}

/// Euler's totient.
pub fn euler_phi(n: u64) -> u64 {
    factorize(n)
        .factors()
        .iter()
        .map(|&(p, e)| (p - 1) * p.pow(e - 1))
        .product()
}

/// Positive divisors of `n`, ascending.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut ds = vec![1u64];
    for &(p, e) in factorize(n).factors() {
        let len = ds.len();
        let mut pk = 1u64;
        for _ in 0..e {
            pk *= p;
            for i in 0..len {
                ds.push(ds[i] * pk);
            }
        }
    }
    ds.sort_unstable();
    ds
}

pub fn is_squarefree(n: u64) -> bool {
    factorize(n).is_squarefree()
}

/// Primes `p` with `lo < p <= hi` and `gcd(p, coprime_to) = 1`, ascending.
pub fn primes_in_window(lo: f64, hi: f64, coprime_to: u64) -> Vec<u64> {
    if !(hi > lo) || hi < 2.0 {
        return Vec::new();
    }
    let start = if lo < 2.0 { 2 } else { lo.floor() as u64 + 1 };
    let end = hi.floor() as u64;
    (start..=end)
        .filter(|&p| is_prime(p) && (p as f64) > lo && gcd(p, coprime_to) == 1)
        .collect()
}

/// Smallest primitive root modulo the odd prime power `p^e`.
pub fn primitive_root_odd_prime_power(p: u64, e: u32) -> Result<u64> {
    if p == 2 || !is_prime(p) || e == 0 {
        return Err(Error::invalid(format!(
            "primitive root requested for non odd prime power {p}^{e}"
        )));
    }
    let pe = p.checked_pow(e).ok_or(Error::Overflow("primitive_root"))?;
    let phi_p = p - 1;
    let qs: Vec<u64> = factorize(phi_p).primes().collect();
    let g = (2..p)
        .find(|&g| qs.iter().all(|&q| pow_mod(g, phi_p / q, p) != 1))
        .unwrap_or(1);
    // A root mod p lifts to p^e unless g^(p-1) = 1 mod p^2.
    if e >= 2 && pow_mod(g, phi_p, p * p) == 1 {
        let lifted = (g..pe)
            .find(|&h| {
                h % p != 0
                    && qs.iter().all(|&q| pow_mod(h, phi_p / q, p) != 1)
                    && pow_mod(h, phi_p, p * p) != 1
            })
            .expect("primitive root exists modulo odd prime powers");
        return Ok(lifted);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_factor(mut n: u64) -> Vec<(u64, u32)> {
        let mut out = Vec::new();
        let mut p = 2;
        while p * p <= n {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            if e > 0 {
                out.push((p, e));
            }
            p += 1;
        }
        if n > 1 {
            out.push((n, 1));
        }
        out
    }

    #[test]
    fn factorize_examples() {
        assert!(factorize(1).is_empty());
        assert_eq!(factorize(12).factors(), &[(2, 2), (3, 1)]);
        assert_eq!(factorize(9699690).factors(), brute_factor(9699690).as_slice());
        assert_eq!(
            factorize(9699690).factors(),
            &[(2, 1), (3, 1), (5, 1), (7, 1), (11, 1), (13, 1), (17, 1), (19, 1)]
        );
    }

    #[test]
    fn factorize_beyond_sieve_square() {
        let p = 1_000_000_007u64;
        let q = 998_244_353u64;
        assert_eq!(factorize(p * q).factors(), &[(q, 1), (p, 1)]);
        let big = (1u64 << 63) - 25; // prime
        assert_eq!(factorize(big).factors(), &[(big, 1)]);
        assert_eq!(factorize(1 << 62).factors(), &[(2, 62)]);
    }

    #[test]
    fn divisor_count_examples() {
        assert_eq!(divisor_count(1), 1);
        assert_eq!(divisor_count(12), 6);
        assert_eq!(divisor_count(1024), 11);
    }

    #[test]
    fn euler_phi_examples() {
        assert_eq!(euler_phi(1), 1);
        assert_eq!(euler_phi(5), 4);
        assert_eq!(euler_phi(60), 16);
    }

    #[test]
    fn primes_in_window_examples() {
        assert_eq!(primes_in_window(2.0, 4.0, 35), vec![3]);
        assert_eq!(primes_in_window(2.0, 10.0, 3), vec![5, 7]);
        let brute: Vec<u64> = (11..=30).filter(|&n| brute_factor(n) == vec![(n, 1)]).collect();
        assert_eq!(primes_in_window(10.0, 30.0, 1), brute);
        assert_eq!(brute, vec![11, 13, 17, 19, 23, 29]);
        assert_eq!(primes_in_window(1.5, 3.0, 5), vec![2, 3]);
        assert!(primes_in_window(24.0, 28.0, 1).is_empty());
    }

    #[test]
    fn gauss_divisor_sum_of_phi() {
        for n in 1..=10_000u64 {
            let s: u64 = divisors(n).into_iter().map(euler_phi).sum();
            assert_eq!(s, n, "n = {n}");
        }
    }

    #[test]
    fn primitive_roots_generate() {
        for &(p, e) in &[(3u64, 1u32), (3, 4), (5, 3), (7, 2), (40487, 2), (101, 1)] {
            let g = primitive_root_odd_prime_power(p, e).unwrap();
            let pe = p.pow(e);
            let phi = (p - 1) * p.pow(e - 1);
            for &(q, _) in factorize(phi).factors() {
                assert_ne!(pow_mod(g, phi / q, pe), 1, "g={g} mod {p}^{e}");
            }
        }
        assert_eq!(primitive_root_odd_prime_power(7, 1).unwrap(), 3);
        assert_eq!(primitive_root_odd_prime_power(5, 1).unwrap(), 2);
    }

    #[test]
    fn crt_and_inverse() {
        assert_eq!(crt(2, 3, 3, 5).unwrap(), 8);
        assert_eq!(inv_mod(3, 7), Some(5));
        assert_eq!(inv_mod(2, 4), None);
        assert!(crt(1, 4, 1, 6).is_err());
    }

    proptest! {
        #[test]
        fn phi_is_multiplicative(a in 1u64..=1_000_000, b in 1u64..=1_000_000) {
            prop_assume!(gcd(a, b) == 1);
            prop_assert_eq!(euler_phi(a * b), euler_phi(a) * euler_phi(b));
        }

        #[test]
        fn factorize_round_trips(n in 1u64..=(1u64 << 63)) {
            let f = factorize(n);
            prop_assert_eq!(f.value().unwrap(), n);
            let ps: Vec<u64> = f.primes().collect();
            prop_assert!(ps.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(ps.iter().all(|&p| is_prime(p)));
        }
    }

    #[test]
    fn factorize_round_trips_on_many_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            let n: u64 = match rng.gen_range(0..3) {
                0 => rng.gen_range(1..=1_000_000),
                1 => rng.gen_range(1..=1_000_000_000_000),
                _ => rng.gen_range(1..=(1u64 << 40)),
            };
            assert_eq!(factorize(n).value().unwrap(), n);
        }
    }
}
