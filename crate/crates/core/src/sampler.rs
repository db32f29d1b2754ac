//! Seeded Monte Carlo for Pitman partitions via the two-parameter Chinese
//! restaurant process.
//!
//! Seeding: a [`SeedSpec`] `(root_seed, stream_index)` selects the ChaCha8
//! generator `ChaCha8Rng::seed_from_u64(root_seed)` on stream
//! `stream_index`. Estimators split their replicates over child streams
//! `seed.child(0), seed.child(1), ...` (see [`SeedSpec::child`]) and merge the
//! per-stream summaries in stream order, so results are reproducible
//! bit-for-bit.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::combinatorics::PartitionCounts;
use crate::error::{Error, Result};
use crate::params::PitmanParams;

/// Replicates drawn from one child stream by the estimators.
pub const REPLICATES_PER_STREAM: u64 = 1024;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub root_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(root_seed: u64, stream_index: u64) -> Self {
        SeedSpec {
            root_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.root_seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// `SeedSpec { root_seed: splitmix64(root_seed ^ splitmix64(stream_index)), stream_index: j }`
    pub fn child(&self, j: u64) -> SeedSpec {
        SeedSpec {
            root_seed: splitmix64(self.root_seed ^ splitmix64(self.stream_index)),
            stream_index: j,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub count: u64,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub standard_error: f64,
    pub moment_order: u32,
}

/// Welford accumulator with the pairwise merge of Chan et al.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64) / n as f64;
        self.count = n;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn finish(&self, moment_order: u32) -> Result<SampleStats> {
        if self.count < 2 {
            return Err(Error::domain("sample statistics", "need at least two replicates"));
        }
        let variance = (self.m2 / (self.count - 1) as f64).max(0.0);
        Ok(SampleStats {
            count: self.count,
            mean: self.mean,
            variance,
            standard_error: (variance / self.count as f64).sqrt(),
            moment_order,
        })
    }
}

/// One partition of `n` grown by the seating rule: customer `m + 1` opens a
/// new block with probability `(theta + k alpha) / (m + theta)` and joins a
/// given block of size `s` with probability `(s - alpha) / (m + theta)`.
pub fn crp_sample_with<R: Rng + ?Sized>(params: &PitmanParams, rng: &mut R) -> PartitionCounts {
    let n = params.n();
    let alpha = params.alpha_f64();
    let theta = params.theta_f64();
    // size -> number of blocks of that size
    let mut blocks: BTreeMap<u64, u64> = BTreeMap::new();
    blocks.insert(1, 1);
    let mut k = 1u64;
    for m in 1..n {
        let total = m as f64 + theta;
        let new_weight = theta + k as f64 * alpha;
        let mut u = rng.random::<f64>() * total;
        if u < new_weight {
            *blocks.entry(1).or_insert(0) += 1;
            k += 1;
            continue;
        }
        u -= new_weight;
        let mut chosen = None;
        for (&size, &count) in &blocks {
            let w = count as f64 * (size as f64 - alpha);
            chosen = Some(size);
            if u < w {
                break;
            }
            u -= w;
        }
        // rounding can leave u just past the last block; it then takes the last one
        let size = chosen.expect("at least one block");
        let slot = blocks.get_mut(&size).expect("chosen size present");
        *slot -= 1;
        if *slot == 0 {
            blocks.remove(&size);
        }
        *blocks.entry(size + 1).or_insert(0) += 1;
    }
    let mut counts = vec![0u64; n as usize];
    for (size, count) in blocks {
        counts[size as usize - 1] = count;
    }
    PartitionCounts::from_counts_unchecked(counts)
}

pub fn crp_sample(params: &PitmanParams, seed: &SeedSpec) -> PartitionCounts {
    crp_sample_with(params, &mut seed.rng())
}

/// The number of blocks of one draw, without tracking block sizes.
///
/// While `k` is fixed the new-block probability `(theta + k alpha) / (m + theta)`
/// decreases in `m`, so its current value `q` bounds every later step. The
/// next candidate step is drawn from a geometric law with parameter `q` and
/// accepted with probability `p / q`, which thins the candidates down to the
/// exact new-block events. The law of the result equals that of
/// `crp_sample(..).length()`, but the two consume the generator differently.
pub fn sample_k_with<R: Rng + ?Sized>(params: &PitmanParams, rng: &mut R) -> u64 {
    let n = params.n();
    let alpha = params.alpha_f64();
    let theta = params.theta_f64();
    let mut k = 1u64;
    let mut m = 1u64;
    while m < n {
        let c = theta + k as f64 * alpha;
        let q = c / (m as f64 + theta);
        if q < 1.0 {
            let u: f64 = 1.0 - rng.random::<f64>();
            let skip = (u.ln() / (-q).ln_1p()).floor();
            if skip >= (n - m) as f64 {
                break;
            }
            m += skip as u64;
        }
        let p = c / (m as f64 + theta);
        if q >= 1.0 || rng.random::<f64>() * q < p {
            k += 1;
        }
        m += 1;
    }
    k
}

pub fn sample_k(params: &PitmanParams, seed: &SeedSpec) -> u64 {
    sample_k_with(params, &mut seed.rng())
}

/// Replicate counts per stream: `ceil(replicates / REPLICATES_PER_STREAM)`
/// streams of `REPLICATES_PER_STREAM`, the last one taking the remainder.
fn stream_plan(replicates: u64) -> impl Iterator<Item = (u64, u64)> {
    let streams = replicates.div_ceil(REPLICATES_PER_STREAM);
    (0..streams).map(move |j| {
        let start = j * REPLICATES_PER_STREAM;
        (j, (replicates - start).min(REPLICATES_PER_STREAM))
    })
}

/// Draws `replicates` values of `K`, in stream order.
pub fn sample_k_many(params: &PitmanParams, replicates: u64, seed: &SeedSpec) -> Vec<u64> {
    let mut out = Vec::with_capacity(replicates as usize);
    for (j, len) in stream_plan(replicates) {
        let mut rng = seed.child(j).rng();
        out.extend((0..len).map(|_| sample_k_with(params, &mut rng)));
    }
    out
}

/// Empirical counts of `K = 1..=n` over `replicates` draws.
pub fn k_histogram(params: &PitmanParams, replicates: u64, seed: &SeedSpec) -> Vec<u64> {
    let mut hist = vec![0u64; params.n() as usize];
    for (j, len) in stream_plan(replicates) {
        let mut rng = seed.child(j).rng();
        for _ in 0..len {
            hist[sample_k_with(params, &mut rng) as usize - 1] += 1;
        }
    }
    hist
}

/// Mean and standard error of `f(K)` over `replicates` draws; each stream
/// is summarised separately and the summaries are merged in stream order.
pub fn mc_statistic<F>(
    params: &PitmanParams,
    replicates: u64,
    seed: &SeedSpec,
    moment_order: u32,
    f: F,
) -> Result<SampleStats>
where
    F: Fn(u64) -> f64,
{
    if replicates < 2 {
        return Err(Error::domain("mc_moments", "replicates must be at least 2"));
    }
    let mut total = RunningStats::default();
    for (j, len) in stream_plan(replicates) {
        let mut rng = seed.child(j).rng();
        let mut part = RunningStats::default();
        for _ in 0..len {
            part.push(f(sample_k_with(params, &mut rng)));
        }
        total.merge(&part);
    }
    total.finish(moment_order)
}

/// Monte Carlo estimate of `E[K^r]`.
pub fn mc_moments(params: &PitmanParams, r: u32, replicates: u64, seed: &SeedSpec) -> Result<SampleStats> {
    if r == 0 {
        return Err(Error::domain("mc_moments", "moment order r must be at least 1"));
    }
    mc_statistic(params, replicates, seed, r, |k| (k as f64).powi(r as i32))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub degrees_of_freedom: u64,
    pub p_value: f64,
    /// Cells left after pooling those with expected count below 5.
    pub cells: usize,
}

impl GofResult {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value >= significance
    }
}

/// Pearson chi-square test of observed counts against cell probabilities.
/// Neighbouring cells are pooled left to right until each expects at least
/// 5 observations; a short remainder joins the last pooled cell.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<GofResult> {
    if observed.len() != probs.len() || observed.is_empty() {
        return Err(Error::domain("chi_square_gof", "observed and probs must have equal, nonzero length"));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::domain("chi_square_gof", "probabilities must be finite and nonnegative"));
    }
    let total: u64 = observed.iter().sum();
    let mass: f64 = probs.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        obs += o as f64;
        exp += p / mass * total as f64;
        if exp >= 5.0 {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => cells.push((obs, exp)),
        }
    }
    if cells.len() < 2 {
        return Err(Error::domain("chi_square_gof", "fewer than two cells after pooling"));
    }
    let statistic = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum::<f64>();
    let dof = cells.len() as u64 - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::domain("chi_square_gof", e.to_string()))?;
    Ok(GofResult {
        statistic,
        degrees_of_freedom: dof,
        p_value: dist.sf(statistic),
        cells: cells.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: u64, a: &str, t: &str) -> PitmanParams {
        PitmanParams::parse(n, a, t).unwrap()
    }

    #[test]
    fn trivial_sizes() {
        let one = p(1, "1/2", "1");
        let seed = SeedSpec::new(7, 0);
        assert_eq!(crp_sample(&one, &seed).counts(), &[1]);
        assert_eq!(sample_k(&one, &seed), 1);
    }

    #[test]
    fn determinism_and_stream_separation() {
        let params = p(50, "1/3", "2");
        let a = SeedSpec::new(42, 3);
        assert_eq!(crp_sample(&params, &a), crp_sample(&params, &a));
        let xs = sample_k_many(&params, 3000, &a);
        assert_eq!(xs, sample_k_many(&params, 3000, &a));
        assert_ne!(xs, sample_k_many(&params, 3000, &SeedSpec::new(42, 4)));
        assert_ne!(a.child(0), a.child(1));
        assert_ne!(a.child(0), SeedSpec::new(42, 4).child(0));
    }

    #[test]
    fn crp_draws_are_partitions() {
        let params = p(40, "3/4", "-1/2");
        let mut rng = SeedSpec::new(1, 0).rng();
        for _ in 0..200 {
            let c = crp_sample_with(&params, &mut rng);
            assert_eq!(c.n(), 40);
            assert!(c.length() >= 1);
        }
    }

    #[test]
    fn running_stats_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut whole = RunningStats::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut left = RunningStats::default();
        let mut right = RunningStats::default();
        xs[..313].iter().for_each(|&x| left.push(x));
        xs[313..].iter().for_each(|&x| right.push(x));
        left.merge(&right);
        let (a, b) = (whole.finish(1).unwrap(), left.finish(1).unwrap());
        assert!((a.mean - b.mean).abs() < 1e-12);
        assert!((a.variance - b.variance).abs() < 1e-9);
    }

    #[test]
    fn mc_moments_preconditions() {
        let params = p(3, "1/2", "1/2");
        let seed = SeedSpec::new(0, 0);
        assert!(mc_moments(&params, 0, 100, &seed).is_err());
        assert!(mc_moments(&params, 1, 1, &seed).is_err());
        let s = mc_moments(&params, 1, 2, &seed).unwrap();
        assert_eq!(s.count, 2);
        assert!((s.standard_error - (s.variance / 2.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gof_pooling_and_decision() {
        let probs = [0.5, 0.3, 0.196, 0.002, 0.002];
        let fair = [500u64, 300, 196, 2, 2];
        let r = chi_square_gof(&fair, &probs).unwrap();
        assert!(r.statistic < 1e-12);
        assert_eq!(r.cells, 3);
        assert!(r.passes(1e-3));
        let skewed = [700u64, 200, 96, 2, 2];
        assert!(!chi_square_gof(&skewed, &probs).unwrap().passes(1e-3));
        assert!(chi_square_gof(&[1, 2], &[1.0]).is_err());
    }
}
