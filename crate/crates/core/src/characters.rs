//! Dirichlet characters modulo Q.
//!
//! The unit group is decomposed along the prime-power factors of Q. Each odd
//! factor p^e contributes one cyclic generator (its smallest primitive root);
//! 2^2 contributes -1 and 2^e with e >= 3 contributes the pair {-1, 5}.
//! Characters are exponent vectors against these generators and values are
//! read off exact rational phases k/lambda, where lambda is the group exponent.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ntheory::{factorize, gcd, lcm, primitive_root_odd_prime_power};
use crate::summation::ComplexSum;

const NOT_UNIT: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Component {
    prime: u64,
    exp: u32,
    modulus: u64,
    /// Index of this component's first generator in the flat generator list.
    first_gen: usize,
    /// Number of generators (0, 1 or 2).
    n_gens: usize,
    /// Discrete logs of each residue mod `modulus`; for 2^e with e >= 3 the
    /// entry packs (a, b) with n = (-1)^a 5^b as `a << 31 | b`.
    dlog: Vec<u32>,
}

/// The group of Dirichlet characters modulo Q.
#[derive(Debug, Clone)]
pub struct CharacterGroup {
    modulus: u64,
    components: Vec<Component>,
    orders: Vec<u64>,
    generators: Vec<u64>,
    exponent: u64,
    order: u64,
    roots: Vec<Complex64>,
}

/// `exp(2 pi i num / den)` evaluated from the reduced fraction.
pub fn root_of_unity(num: u64, den: u64) -> Complex64 {
    let num = num % den;
    let g = gcd(num, den);
    let (a, b) = (num / g, den / g);
    match (a, b) {
        (0, 1) => Complex64::new(1.0, 0.0),
        (1, 2) => Complex64::new(-1.0, 0.0),
        (1, 4) => Complex64::new(0.0, 1.0),
        (3, 4) => Complex64::new(0.0, -1.0),
        _ => {
            // Map the phase into (-1/2, 1/2] before scaling by 2 pi.
            let frac = if 2 * a > b {
                -((b - a) as f64 / b as f64)
            } else {
                a as f64 / b as f64
            };
            let (s, c) = (TAU * frac).sin_cos();
            Complex64::new(c, s)
        }
    }
}

impl CharacterGroup {
    /// Builds the character group modulo `q >= 1`.
    pub fn new(q: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::invalid("character modulus must be positive"));
        }
        if q > u32::MAX as u64 {
            return Err(Error::invalid(format!("character modulus {q} too large")));
        }
        let mut components = Vec::new();
        let mut orders = Vec::new();
        let mut generators = Vec::new();
        for &(p, e) in factorize(q).factors() {
            let pe = p.pow(e);
            let first_gen = orders.len();
            let mut dlog = vec![NOT_UNIT; pe as usize];
            let n_gens;
            if p == 2 {
                match e {
                    1 => {
                        dlog[1] = 0;
                        n_gens = 0;
                    }
                    2 => {
                        dlog[1] = 0;
                        dlog[3] = 1;
                        orders.push(2);
                        generators.push(crt_lift(q, pe, pe - 1));
                        n_gens = 1;
                    }
                    _ => {
                        let half = 1u64 << (e - 2);
                        let mut x = 1u64;
                        for b in 0..half {
                            dlog[x as usize] = b as u32;
                            dlog[(pe - x) as usize] = (1u32 << 31) | b as u32;
                            x = x * 5 % pe;
                        }
                        orders.push(2);
                        orders.push(half);
                        generators.push(crt_lift(q, pe, pe - 1));
                        generators.push(crt_lift(q, pe, 5));
                        n_gens = 2;
                    }
                }
            } else {
                let g = primitive_root_odd_prime_power(p, e)?;
                let phi = (p - 1) * p.pow(e - 1);
                let mut x = 1u64;
                for j in 0..phi {
                    dlog[x as usize] = j as u32;
                    x = x * g % pe;
                }
                orders.push(phi);
                generators.push(crt_lift(q, pe, g));
                n_gens = 1;
            }
            components.push(Component {
                prime: p,
                exp: e,
                modulus: pe,
                first_gen,
                n_gens,
                dlog,
            });
        }
        let mut exponent = 1u64;
        for &o in &orders {
            exponent = lcm(exponent, o)?;
        }
        let order = orders.iter().product();
        let roots = (0..exponent).map(|k| root_of_unity(k, exponent)).collect();
        Ok(Self {
            modulus: q,
            components,
            orders,
            generators,
            exponent,
            order,
            roots,
        })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Number of characters, equal to phi(Q).
    pub fn order(&self) -> u64 {
        self.order
    }

    /// Orders of the generators, in canonical order.
    pub fn generator_orders(&self) -> &[u64] {
        &self.orders
    }

    /// Generators lifted to residues mod Q (identity on the other factors).
    pub fn generators(&self) -> &[u64] {
        &self.generators
    }

    /// Exponent of the group (lcm of generator orders).
    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    /// Discrete logs of `n` against the generators, or `None` if
    /// `gcd(n, Q) > 1`.
    pub fn discrete_log(&self, n: i64) -> Option<Vec<u64>> {
        let r = n.rem_euclid(self.modulus as i64) as u64;
        let mut out = vec![0u64; self.orders.len()];
        for c in &self.components {
            let d = c.dlog[(r % c.modulus) as usize];
            if d == NOT_UNIT {
                return None;
            }
            match c.n_gens {
                0 => {}
                1 => out[c.first_gen] = d as u64,
                _ => {
                    out[c.first_gen] = (d >> 31) as u64;
                    out[c.first_gen + 1] = (d & 0x7fff_ffff) as u64;
                }
            }
        }
        Some(out)
    }

    /// Phase numerator k with chi(n) = exp(2 pi i k / exponent).
    fn phase(&self, exponents: &[u64], r: u64) -> Option<u64> {
        let lam = self.exponent;
        let mut k: u64 = 0;
        for c in &self.components {
            let d = c.dlog[(r % c.modulus) as usize];
            if d == NOT_UNIT {
                return None;
            }
            let logs: [u64; 2] = match c.n_gens {
                0 => continue,
                1 => [d as u64, 0],
                _ => [(d >> 31) as u64, (d & 0x7fff_ffff) as u64],
            };
            for (j, &lg) in logs.iter().enumerate().take(c.n_gens) {
                let g = c.first_gen + j;
                let ord = self.orders[g];
                let term = (exponents[g] % ord) as u128 * lg as u128 % ord as u128;
                k = ((k as u128 + term * (lam / ord) as u128) % lam as u128) as u64;
            }
        }
        Some(k)
    }

    /// Canonical character with the given index in `0..phi(Q)`.
    ///
    /// The exponent vector is the mixed-radix expansion of the index with
    /// the last generator as least significant digit, so index 0 is the
    /// principal character and indices follow lexicographic order.
    pub fn character(self: &Arc<Self>, index: u64) -> Result<DirichletCharacter> {
        if index >= self.order {
            return Err(Error::invalid(format!(
                "character index {index} out of range for modulus {} ({} characters)",
                self.modulus, self.order
            )));
        }
        let mut exps = vec![0u64; self.orders.len()];
        let mut rest = index;
        for (slot, &ord) in exps.iter_mut().zip(&self.orders).rev() {
            *slot = rest % ord;
            rest /= ord;
        }
        Ok(DirichletCharacter {
            group: Arc::clone(self),
            exponents: exps,
            index,
        })
    }

    /// Character with an explicit exponent vector.
    pub fn character_from_exponents(
        self: &Arc<Self>,
        exponents: &[u64],
    ) -> Result<DirichletCharacter> {
        if exponents.len() != self.orders.len() {
            return Err(Error::invalid(format!(
                "expected {} exponents, got {}",
                self.orders.len(),
                exponents.len()
            )));
        }
        let exps: Vec<u64> = exponents
            .iter()
            .zip(&self.orders)
            .map(|(&e, &o)| e % o)
            .collect();
        let index = exps.iter().zip(&self.orders).fold(0u64, |acc, (&e, &o)| acc * o + e);
        Ok(DirichletCharacter {
            group: Arc::clone(self),
            exponents: exps,
            index,
        })
    }

    /// Iterates over all phi(Q) characters in canonical order.
    pub fn characters(self: &Arc<Self>) -> impl Iterator<Item = DirichletCharacter> + '_ {
        (0..self.order).map(move |i| self.character(i).expect("index in range"))
    }

    pub fn principal(self: &Arc<Self>) -> DirichletCharacter {
        self.character(0).expect("principal character exists")
    }
}

/// Residue mod `q` congruent to `g` mod `pe` and to 1 mod `q / pe`.
fn crt_lift(q: u64, pe: u64, g: u64) -> u64 {
    let rest = q / pe;
    if rest == 1 {
        return g % pe;
    }
    crate::ntheory::crt(g % pe, pe, 1, rest).expect("coprime factors")
}

/// A Dirichlet character, stored as exponents against the group's generators.
#[derive(Debug, Clone)]
pub struct DirichletCharacter {
    group: Arc<CharacterGroup>,
    exponents: Vec<u64>,
    index: u64,
}

impl PartialEq for DirichletCharacter {
    fn eq(&self, other: &Self) -> bool {
        self.group.modulus == other.group.modulus && self.exponents == other.exponents
    }
}

impl DirichletCharacter {
    pub fn modulus(&self) -> u64 {
        self.group.modulus
    }

    pub fn group(&self) -> &Arc<CharacterGroup> {
        &self.group
    }

    pub fn exponents(&self) -> &[u64] {
        &self.exponents
    }

    /// Canonical index within the group.
    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn is_principal(&self) -> bool {
        self.exponents.iter().all(|&e| e == 0)
    }

    /// chi(n); zero when gcd(n, Q) > 1.
    pub fn value(&self, n: i64) -> Complex64 {
        let r = n.rem_euclid(self.group.modulus as i64) as u64;
        match self.group.phase(&self.exponents, r) {
            Some(k) => self.group.roots[k as usize],
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// chi(n) for an unsigned argument.
    pub fn value_u(&self, n: u64) -> Complex64 {
        let r = n % self.group.modulus;
        match self.group.phase(&self.exponents, r) {
            Some(k) => self.group.roots[k as usize],
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Values at every residue 0..Q, for fast repeated evaluation.
    pub fn value_table(&self) -> Vec<Complex64> {
        (0..self.group.modulus).map(|r| self.value_u(r)).collect()
    }

    /// Order of the character as an element of the dual group.
    pub fn order(&self) -> u64 {
        self.exponents
            .iter()
            .zip(&self.group.orders)
            .map(|(&e, &o)| o / gcd(e, o))
            .fold(1, |acc, d| acc / gcd(acc, d) * d)
    }

    /// Pointwise product of two characters of the same modulus.
    pub fn mul(&self, other: &DirichletCharacter) -> Result<DirichletCharacter> {
        if self.modulus() != other.modulus() {
            return Err(Error::invalid("characters have different moduli"));
        }
        let exps: Vec<u64> = self
            .exponents
            .iter()
            .zip(&other.exponents)
            .zip(&self.group.orders)
            .map(|((&a, &b), &o)| (a + b) % o)
            .collect();
        self.group.character_from_exponents(&exps)
    }

    /// Conductor (metadata only; characters are never filtered by it).
    pub fn conductor(&self) -> u64 {
        let mut f = 1u64;
        for c in &self.group.components {
            let fe = match (c.prime, c.n_gens) {
                (_, 0) => 0,
                (2, 1) => {
                    if self.exponents[c.first_gen] % 2 == 1 {
                        2
                    } else {
                        0
                    }
                }
                (2, _) => {
                    let a = self.exponents[c.first_gen] % 2;
                    let half = self.group.orders[c.first_gen + 1];
                    let b = self.exponents[c.first_gen + 1] % half;
                    if b == 0 {
                        if a == 1 {
                            2
                        } else {
                            0
                        }
                    } else {
                        let d = half / gcd(b, half);
                        d.trailing_zeros() + 2
                    }
                }
                (p, _) => {
                    let ord = self.group.orders[c.first_gen];
                    let k = self.exponents[c.first_gen] % ord;
                    if k == 0 {
                        0
                    } else {
                        let mut d = ord / gcd(k, ord);
                        let mut v = 0;
                        while d % p == 0 {
                            d /= p;
                            v += 1;
                        }
                        v + 1
                    }
                }
            };
            debug_assert!(fe <= c.exp);
            f *= c.prime.pow(fe);
        }
        f
    }

    pub fn is_primitive(&self) -> bool {
        self.conductor() == self.group.modulus
    }
}

/// Sum of psi(a) conj(psi(b)) over all characters psi mod `q`.
pub fn orthogonality_sum(q: u64, a: i64, b: i64) -> Result<Complex64> {
    let group = Arc::new(CharacterGroup::new(q)?);
    orthogonality_sum_in(&group, a, b)
}

/// [`orthogonality_sum`] against an already constructed group.
pub fn orthogonality_sum_in(group: &Arc<CharacterGroup>, a: i64, b: i64) -> Result<Complex64> {
    let q = group.modulus();
    for v in [a, b] {
        if gcd(v.unsigned_abs() % q, q) != 1 && q > 1 {
            return Err(Error::NotCoprime { value: v, modulus: q });
        }
    }
    let mut acc = ComplexSum::new();
    for psi in group.characters() {
        acc.add(psi.value(a) * psi.value(b).conj());
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ntheory::euler_phi;

    fn group(q: u64) -> Arc<CharacterGroup> {
        Arc::new(CharacterGroup::new(q).unwrap())
    }

    #[test]
    fn group_sizes() {
        assert_eq!(group(1).order(), 1);
        assert_eq!(group(5).order(), 4);
        let g8 = group(8);
        assert_eq!(g8.order(), 4);
        assert_eq!(g8.generator_orders(), &[2, 2]);
    }

    #[test]
    fn mod_8_unit_group_is_not_cyclic() {
        // Brute-force multiplication table: every unit squares to 1.
        for u in [1u64, 3, 5, 7] {
            assert_eq!(u * u % 8, 1);
        }
        let g = group(8);
        let orders: Vec<u64> = g.characters().map(|c| c.order()).collect();
        assert_eq!(orders, vec![1, 2, 2, 2]);
    }

    #[test]
    fn evaluation_examples() {
        let g = group(5);
        assert_eq!(g.principal().value(7), Complex64::new(1.0, 0.0));
        for chi in g.characters() {
            assert_eq!(chi.value(10), Complex64::new(0.0, 0.0));
        }
        let chi = g.character(1).unwrap();
        assert_eq!(chi.value(2), Complex64::new(0.0, 1.0));
        assert_eq!(chi.value(4), Complex64::new(-1.0, 0.0));
        assert_eq!(chi.value(-1), Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn orthogonality_examples() {
        assert!((orthogonality_sum(5, 2, 2).unwrap() - 4.0).norm() < 1e-12);
        assert!(orthogonality_sum(5, 2, 3).unwrap().norm() < 1e-12);
        // Brute force over the four characters mod 12.
        let g = group(12);
        assert_eq!(g.order(), 4);
        let mut brute = Complex64::new(0.0, 0.0);
        for chi in g.characters() {
            brute += chi.value(5) * chi.value(7).conj();
        }
        assert!(brute.norm() < 1e-12);
        assert!(orthogonality_sum(12, 5, 7).unwrap().norm() < 1e-12);
        assert!(matches!(
            orthogonality_sum(12, 4, 7),
            Err(Error::NotCoprime { value: 4, modulus: 12 })
        ));
    }

    #[test]
    fn multiplicativity_and_support() {
        for q in [7u64, 8, 16, 36, 60, 97, 120, 243] {
            let g = group(q);
            for chi in g.characters() {
                assert_eq!(chi.value(1), Complex64::new(1.0, 0.0));
                for m in 0..q as i64 * 2 {
                    let vm = chi.value(m);
                    let coprime = gcd(m as u64 % q, q) == 1;
                    if coprime {
                        assert!((vm.norm() - 1.0).abs() < 1e-15);
                    } else {
                        assert_eq!(vm, Complex64::new(0.0, 0.0));
                    }
                    for n in [3i64, 11, 17, 1000] {
                        let lhs = chi.value(m * n);
                        let rhs = vm * chi.value(n);
                        assert!((lhs - rhs).norm() < 1e-13, "q={q} m={m} n={n}");
                    }
                }
            }
        }
    }

    #[test]
    fn exactly_one_principal_and_distinct_characters() {
        for q in 1..=120u64 {
            let g = group(q);
            let chars: Vec<_> = g.characters().collect();
            assert_eq!(chars.len() as u64, euler_phi(q));
            let units: Vec<i64> = (1..=q as i64).filter(|&n| gcd(n as u64, q) == 1).collect();
            let principal = chars
                .iter()
                .filter(|c| units.iter().all(|&n| (c.value(n) - 1.0).norm() < 1e-15))
                .count();
            assert_eq!(principal, 1, "q={q}");
            let tables: Vec<Vec<(i64, i64)>> = chars
                .iter()
                .map(|c| {
                    units
                        .iter()
                        .map(|&n| {
                            let v = c.value(n);
                            ((v.re * 1e9).round() as i64, (v.im * 1e9).round() as i64)
                        })
                        .collect()
                })
                .collect();
            for i in 0..tables.len() {
                for j in 0..i {
                    assert_ne!(tables[i], tables[j], "q={q}");
                }
            }
        }
    }

    #[test]
    fn conductors_match_brute_force() {
        for q in [5u64, 8, 9, 12, 16, 25, 27, 32, 45, 60, 64, 100] {
            let g = group(q);
            for chi in g.characters() {
                // Smallest divisor d of q such that chi is trivial on units = 1 mod d.
                let brute = crate::ntheory::divisors(q)
                    .into_iter()
                    .find(|&d| {
                        (1..q).filter(|&n| gcd(n, q) == 1 && n % d == 1 % d).all(|n| {
                            (chi.value_u(n) - 1.0).norm() < 1e-12
                        })
                    })
                    .unwrap();
                assert_eq!(chi.conductor(), brute, "q={q} index={}", chi.index());
            }
        }
    }

    #[test]
    fn product_with_principal_changes_nothing() {
        let g = group(45);
        let psi0 = g.principal();
        for chi in g.characters() {
            assert_eq!(chi.mul(&psi0).unwrap(), chi);
        }
    }

    #[test]
    fn roots_of_unity_are_exact_at_quarter_turns() {
        assert_eq!(root_of_unity(3, 12), Complex64::new(0.0, 1.0));
        assert_eq!(root_of_unity(6, 12), Complex64::new(-1.0, 0.0));
        for k in 0..97 {
            assert!((root_of_unity(k, 97).norm() - 1.0).abs() < 1e-15);
        }
    }
}
