//! Compensated accumulation and deterministic parallel reductions.
//!
//! Every long sum in the crate goes through [`NeumaierSum`] or
//! [`ComplexSum`]. Parallel sums split their index range into blocks whose
//! boundaries depend only on the range and the block size, never on the
//! number of worker threads, and combine the block partials with a fixed
//! pairwise tree. The result is therefore bit-identical for any thread count.

use num_complex::Complex64;
use rayon::prelude::*;

/// Neumaier (improved Kahan-Babuska) running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub const fn new() -> Self {
        Self { sum: 0.0, comp: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.comp);
    }
}

impl Extend<f64> for NeumaierSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Compensated sum of complex numbers, one Neumaier accumulator per component.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ComplexSum {
    re: NeumaierSum,
    im: NeumaierSum,
}

impl ComplexSum {
    pub const fn new() -> Self {
        Self {
            re: NeumaierSum::new(),
            im: NeumaierSum::new(),
        }
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }

    pub fn merge(&mut self, other: &ComplexSum) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
    }
}

impl Extend<Complex64> for ComplexSum {
    fn extend<I: IntoIterator<Item = Complex64>>(&mut self, iter: I) {
        for z in iter {
            self.add(z);
        }
    }
}

/// Compensated sum of a slice of reals.
pub fn sum_f64(values: &[f64]) -> f64 {
    let mut acc = NeumaierSum::new();
    acc.extend(values.iter().copied());
    acc.value()
}

/// Compensated sum of a slice of complex numbers.
pub fn sum_complex(values: &[Complex64]) -> Complex64 {
    let mut acc = ComplexSum::new();
    acc.extend(values.iter().copied());
    acc.value()
}

/// Fixed-shape pairwise tree reduction of complex accumulators.
///
/// Leaves are combined as (0,1), (2,3), ... at each level, so the result
/// depends only on the order of `parts`.
pub fn tree_reduce(mut parts: Vec<ComplexSum>) -> ComplexSum {
    if parts.is_empty() {
        return ComplexSum::new();
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.chunks_exact(2);
        for pair in &mut it {
            let mut a = pair[0];
            a.merge(&pair[1]);
            next.push(a);
        }
        if let [last] = it.remainder() {
            next.push(*last);
        }
        parts = next;
    }
    parts[0]
}

/// Default block length for parallel reductions.
pub const DEFAULT_BLOCK: usize = 4096;

/// Deterministic parallel sum of `term(i)` for `i` in `0..n`.
///
/// The range is cut into blocks of `block` indices; each block is summed
/// sequentially with compensation and the partials are tree-reduced.
pub fn par_sum_indexed<F>(n: usize, block: usize, term: F) -> Complex64
where
    F: Fn(usize) -> Complex64 + Sync,
{
    par_blocks(n, block, |lo, hi, acc| {
        for i in lo..hi {
            acc.add(term(i));
        }
    })
    .value()
}

/// Deterministic parallel reduction where each block fills its own
/// accumulator through `work(lo, hi, acc)`.
pub fn par_blocks<F>(n: usize, block: usize, work: F) -> ComplexSum
where
    F: Fn(usize, usize, &mut ComplexSum) + Sync,
{
    let block = block.max(1);
    let nblocks = n.div_ceil(block);
    let parts: Vec<ComplexSum> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * block;
            let hi = (lo + block).min(n);
            let mut acc = ComplexSum::new();
            work(lo, hi, &mut acc);
            acc
        })
        .collect();
    tree_reduce(parts)
}

/// Like [`par_blocks`] with `k` independent accumulators per block.
pub fn par_blocks_multi<F>(n: usize, block: usize, k: usize, work: F) -> Vec<ComplexSum>
where
    F: Fn(usize, usize, &mut [ComplexSum]) + Sync,
{
    let block = block.max(1);
    let nblocks = n.div_ceil(block);
    let parts: Vec<Vec<ComplexSum>> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * block;
            let hi = (lo + block).min(n);
            let mut acc = vec![ComplexSum::new(); k];
            work(lo, hi, &mut acc);
            acc
        })
        .collect();
    (0..k)
        .map(|j| tree_reduce(parts.iter().map(|p| p[j]).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancelled_small_terms() {
        let mut s = NeumaierSum::new();
        s.extend([1.0, 1e100, 1.0, -1e100]);
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn complex_sum_matches_exact_small_integers() {
        let v: Vec<Complex64> = (1..=100)
            .map(|k| Complex64::new(k as f64, -(k as f64)))
            .collect();
        assert_eq!(sum_complex(&v), Complex64::new(5050.0, -5050.0));
    }

    #[test]
    fn tree_reduce_handles_odd_lengths() {
        let parts: Vec<ComplexSum> = (0..7)
            .map(|k| {
                let mut c = ComplexSum::new();
                c.add(Complex64::new(k as f64, 0.0));
                c
            })
            .collect();
        assert_eq!(tree_reduce(parts).value().re, 21.0);
        assert_eq!(tree_reduce(Vec::new()).value(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn parallel_sum_is_independent_of_thread_count() {
        let term = |i: usize| Complex64::new(1.0 / (i as f64 + 1.0), (i as f64).sin());
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| par_sum_indexed(100_000, 1000, term));
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| par_sum_indexed(100_000, 1000, term));
        assert_eq!(one, four);
    }
}
