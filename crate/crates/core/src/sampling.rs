//! Seeded randomness, balanced downsampling and train/test splitting.
//!
//! All randomness in the crate flows through [`RandomSource`]: ChaCha with 8
//! rounds (`rand_chacha::ChaCha8Rng`), keyed by `rand_core`'s
//! `seed_from_u64` expansion of a 64-bit seed. Uniform integers use
//! Lemire's widening-multiply rejection method and uniform reals take the top
//! 53 bits of a draw, so the whole bitstream is platform independent.

use alloc::format;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::EncodedMatrix;
use crate::math;

/// Deterministic random stream.
#[derive(Debug, Clone)]
pub struct RandomSource {
    rng: ChaCha8Rng,
    seed: u64,
}

impl RandomSource {
    pub const ALGORITHM: &'static str = "chacha8/seed_from_u64";

    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 32-bit words consumed so far.
    pub fn stream_position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        loop {
            let m = u128::from(self.next_u64()) * u128::from(n);
            let low = m as u64;
            if low < n {
                let threshold = n.wrapping_neg() % n;
                if low < threshold {
                    continue;
                }
            }
            return (m >> 64) as usize;
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal via Box-Muller (two uniforms per call).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        math::sqrt(-2.0 * math::ln(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct elements drawn uniformly without replacement
    /// (partial Fisher-Yates). The input order of `items` is not preserved.
    pub fn sample_without_replacement<T: Copy>(&mut self, items: &mut [T], k: usize) -> Vec<T> {
        let k = k.min(items.len());
        for i in 0..k {
            let j = i + self.below(items.len() - i);
            items.swap(i, j);
        }
        items[..k].to_vec()
    }
}

/// SplitMix64 finalizer; a bijection on `u64`.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Seed for run `index` under `master_seed`.
///
/// `master + (index + 1) * gamma` is injective in `index` (gamma is odd) and the
/// finalizer is a bijection, so seeds of one master are pairwise distinct.
pub fn run_seed(master_seed: u64, index: usize) -> u64 {
    mix64(master_seed.wrapping_add((index as u64).wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// `n_runs` per-run seeds; a pure function of `(master_seed, index)`.
pub fn derive_run_seeds(master_seed: u64, n_runs: usize) -> Vec<u64> {
    (0..n_runs).map(|i| run_seed(master_seed, i)).collect()
}

/// Keeps every positive row plus an equal number of negatives drawn without
/// replacement, then shuffles the result.
pub fn balanced_downsample(data: &EncodedMatrix, seed: u64) -> Result<EncodedMatrix> {
    let (mut negatives, positives): (Vec<usize>, Vec<usize>) =
        (0..data.n_rows()).partition(|&i| data.labels()[i] == 0);
    if positives.is_empty() {
        return Err(Error::NoMinoritySamples);
    }
    if negatives.len() < positives.len() {
        return Err(Error::MajoritySmallerThanMinority {
            majority: negatives.len(),
            minority: positives.len(),
        });
    }
    let mut rng = RandomSource::new(seed);
    let chosen = rng.sample_without_replacement(&mut negatives, positives.len());
    let mut rows = positives;
    rows.extend(chosen);
    rng.shuffle(&mut rows);
    Ok(data.select_rows(&rows))
}

/// Train/test split parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.70, stratified: true, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidParameter {
                name: "train_fraction",
                reason: format!("{} is not in (0, 1)", self.train_fraction),
            });
        }
        Ok(())
    }
}

fn train_count(n: usize, fraction: f64) -> usize {
    (math::round(fraction * n as f64) as usize).clamp(1, n - 1)
}

/// Per-class train counts summing to `round(fraction * n)`. Floors of the
/// per-class quotas are topped up by largest remainder (class 0 first on ties),
/// then each count is kept within `[1, n_c - 1]`.
fn stratified_counts(sizes: [usize; 2], fraction: f64) -> [usize; 2] {
    let total = train_count(sizes[0] + sizes[1], fraction);
    let quotas = sizes.map(|n| fraction * n as f64);
    let mut counts = quotas.map(|q| math::floor(q) as usize);
    let mut short = total.saturating_sub(counts[0] + counts[1]);
    let mut order = [0, 1];
    if quotas[1] - math::floor(quotas[1]) > quotas[0] - math::floor(quotas[0]) {
        order = [1, 0];
    }
    for c in order {
        if short > 0 {
            counts[c] += 1;
            short -= 1;
        }
    }
    [counts[0].clamp(1, sizes[0] - 1), counts[1].clamp(1, sizes[1] - 1)]
}

/// Partitions the rows into train and test sets. Each side is shuffled.
pub fn split(data: &EncodedMatrix, spec: &SplitSpec) -> Result<(EncodedMatrix, EncodedMatrix)> {
    spec.validate()?;
    let mut rng = RandomSource::new(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    if spec.stratified {
        let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (i, &l) in data.labels().iter().enumerate() {
            by_class[usize::from(l == 1)].push(i);
        }
        for (class, rows) in by_class.iter().enumerate() {
            if rows.len() < 2 {
                return Err(Error::TooFewRows(format!(
                    "class {class} has {} rows, stratified split needs at least 2",
                    rows.len()
                )));
            }
        }
        let counts = stratified_counts([by_class[0].len(), by_class[1].len()], spec.train_fraction);
        for (rows, k) in by_class.iter_mut().zip(counts) {
            rng.shuffle(rows);
            train.extend_from_slice(&rows[..k]);
            test.extend_from_slice(&rows[k..]);
        }
    } else {
        if data.n_rows() < 2 {
            return Err(Error::TooFewRows(format!("{} rows, split needs at least 2", data.n_rows())));
        }
        let mut rows: Vec<usize> = (0..data.n_rows()).collect();
        rng.shuffle(&mut rows);
        let k = train_count(rows.len(), spec.train_fraction);
        test.extend_from_slice(&rows[k..]);
        rows.truncate(k);
        train = rows;
    }
    rng.shuffle(&mut train);
    rng.shuffle(&mut test);
    Ok((data.select_rows(&train), data.select_rows(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn labelled(pos: usize, neg: usize) -> EncodedMatrix {
        let n = pos + neg;
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i < pos)).collect();
        let values = (0..n).map(|i| i as f64).collect();
        EncodedMatrix::new(vec!["x".to_string()], values, labels).unwrap()
    }

    #[test]
    fn downsample_1096_rows() {
        let data = labelled(548, 28524);
        let out = balanced_downsample(&data, 42).unwrap();
        assert_eq!(out.n_rows(), 1096);
        assert_eq!(out.count_positive(), 548);
    }

    #[test]
    fn already_balanced_keeps_everything() {
        let data = labelled(3, 3);
        let out = balanced_downsample(&data, 1).unwrap();
        let mut ids = out.row_ids().to_vec();
        ids.sort_unstable();
        assert_eq!(ids, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn downsample_depends_on_seed_only() {
        let data = labelled(5, 100);
        let a = balanced_downsample(&data, 1).unwrap();
        let b = balanced_downsample(&data, 1).unwrap();
        let c = balanced_downsample(&data, 2).unwrap();
        assert_eq!(a, b);
        let negs = |m: &EncodedMatrix| {
            let mut v: Vec<usize> = m.row_ids().iter().copied().filter(|&i| i >= 5).collect();
            v.sort_unstable();
            v
        };
        assert_ne!(negs(&a), negs(&c));
    }

    #[test]
    fn downsample_errors() {
        assert_eq!(balanced_downsample(&labelled(0, 5), 1), Err(Error::NoMinoritySamples));
        assert_eq!(
            balanced_downsample(&labelled(4, 3), 1),
            Err(Error::MajoritySmallerThanMinority { majority: 3, minority: 4 })
        );
    }

    #[test]
    fn split_1096_at_seventy_percent() {
        let data = labelled(548, 548);
        let (train, test) = split(&data, &SplitSpec { seed: 3, ..SplitSpec::default() }).unwrap();
        // 0.7 * 1096 = 767.2; each class quota is 383.6
        assert_eq!(train.n_rows(), 767);
        assert_eq!(test.n_rows(), 329);
        assert_eq!(train.count_positive(), 383);
        assert_eq!(test.count_positive(), 165);
    }

    #[test]
    fn even_split_is_mixed() {
        let data = labelled(5, 5);
        let spec = SplitSpec { train_fraction: 0.5, stratified: true, seed: 9 };
        let (train, test) = split(&data, &spec).unwrap();
        assert_eq!(train.n_rows(), 5);
        assert_eq!(test.n_rows(), 5);
        assert!(train.count_positive() > 0 && train.count_positive() < 5);
        assert_eq!(split(&data, &spec).unwrap(), (train, test));
    }

    #[test]
    fn split_errors() {
        let data = labelled(1, 5);
        assert!(matches!(split(&data, &SplitSpec::default()), Err(Error::TooFewRows(_))));
        let bad = SplitSpec { train_fraction: 1.0, ..SplitSpec::default() };
        assert!(matches!(split(&labelled(5, 5), &bad), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn run_seeds_are_distinct_and_stable() {
        let a = derive_run_seeds(42, 100);
        assert_eq!(a, derive_run_seeds(42, 100));
        let mut s = a.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 100);
        assert_eq!(derive_run_seeds(42, 3), a[..3].to_vec());
        assert_ne!(derive_run_seeds(1, 1), derive_run_seeds(2, 1));
    }

    #[test]
    fn below_is_in_range_and_uniformish() {
        let mut rng = RandomSource::new(5);
        let mut counts = [0usize; 6];
        for _ in 0..60_000 {
            counts[rng.below(6)] += 1;
        }
        for c in counts {
            assert!((9_000..11_000).contains(&c), "{counts:?}");
        }
        let u = rng.uniform();
        assert!((0.0..1.0).contains(&u));
        assert!(rng.stream_position() > 0);
    }
}
