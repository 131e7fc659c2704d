//! Monte-Carlo experiments with random equal-weight cubatures on `[−1, 1]^d`.
//!
//! Repetition `r` of an experiment with seed `s` draws from ChaCha8 seeded with
//! `s` on stream `r`, so results do not depend on how repetitions are split
//! across threads. Every estimator is a fold over per-repetition values, which
//! lets callers compute those values in parallel and reuse them (common random
//! numbers) across several `ε` or bin radii.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::{exp, lgamma, ln, sqrt, PI};
use crate::momentmap::MultiIndexBasis;

/// Identifier of the generator and stream layout, recorded with every result.
pub const RNG_ALGORITHM: &str =
    "chacha8 (rand_chacha 0.9), seed_from_u64(seed), stream = repetition";

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Generator for repetition `rep`.
pub fn rep_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// `M_k` of the uniform measure on the cube: `Π_i (0 if α_i odd else 1/(α_i + 1))`.
pub fn cube_multimoments(k: u32, d: u32) -> Vec<f64> {
    MultiIndexBasis::new(k, d)
        .indices()
        .iter()
        .map(|a| {
            a.iter()
                .map(|&e| {
                    if e % 2 == 1 {
                        0.0
                    } else {
                        1.0 / f64::from(e + 1)
                    }
                })
                .product()
        })
        .collect()
}

/// `M_k(σ_n) = (1/n) Σ P_k^d(x_i)` for `n` uniform points of the cube.
pub fn sample_moment_vector<R: Rng>(n: usize, k: u32, d: u32, rng: &mut R) -> Vec<f64> {
    let basis = MultiIndexBasis::new(k, d);
    let mut acc = alloc::vec![0.0; basis.len()];
    let mut x = alloc::vec![0.0; d as usize];
    for _ in 0..n {
        for v in x.iter_mut() {
            *v = 2.0 * rng.random::<f64>() - 1.0;
        }
        for (a, m) in acc.iter_mut().zip(basis.eval(&x)) {
            *a += m;
        }
    }
    acc.iter().map(|a| a / n as f64).collect()
}

/// `S̄_n = √n (M_k(σ_n) − M_k(σ))` for repetition `rep`.
pub fn normalized_deviation(n: usize, k: u32, d: u32, seed: u64, rep: u64) -> Vec<f64> {
    let mut rng = rep_rng(seed, rep);
    let exact = cube_multimoments(k, d);
    let rn = sqrt(n as f64);
    sample_moment_vector(n, k, d, &mut rng)
        .iter()
        .zip(&exact)
        .map(|(a, b)| rn * (a - b))
        .collect()
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn euclidean_norm(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum())
}

/// Wilson score interval for `hits` successes in `reps` trials at 95%.
pub fn wilson_interval(hits: u64, reps: u64) -> (f64, f64) {
    let n = reps as f64;
    let p = hits as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    let lo = if hits == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let hi = if hits == reps {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

/// Monte-Carlo estimate of `P(‖M_k(σ_n) − M_k(σ)‖_∞ ≤ ε/√n)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SmallBallEstimate {
    pub n: usize,
    pub k: u32,
    pub d: u32,
    pub eps: f64,
    pub repetitions: u64,
    pub hit_count: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub rng: String,
    /// Smallest `√n ‖·‖_∞` among the misses.
    pub nearest_miss: Option<f64>,
}

/// Folds per-repetition values `√n ‖M_k(σ_n) − M_k(σ)‖_∞` into an estimate.
pub fn small_ball_from_deviations(
    deviations: &[f64],
    n: usize,
    k: u32,
    d: u32,
    eps: f64,
    seed: u64,
) -> SmallBallEstimate {
    let reps = deviations.len() as u64;
    let hits = deviations.iter().filter(|v| **v <= eps).count() as u64;
    let nearest_miss = deviations
        .iter()
        .copied()
        .filter(|v| *v > eps)
        .reduce(f64::min);
    let (ci_low, ci_high) = wilson_interval(hits, reps);
    SmallBallEstimate {
        n,
        k,
        d,
        eps,
        repetitions: reps,
        hit_count: hits,
        estimate: hits as f64 / reps as f64,
        ci_low,
        ci_high,
        seed,
        rng: RNG_ALGORITHM.into(),
        nearest_miss,
    }
}

/// `√n ‖M_k(σ_n) − M_k(σ)‖_∞` for repetitions `0..reps`.
pub fn sup_deviations(n: usize, k: u32, d: u32, reps: u64, seed: u64) -> Vec<f64> {
    (0..reps)
        .map(|r| sup_norm(&normalized_deviation(n, k, d, seed, r)))
        .collect()
}

/// Sequential small-ball estimate.
pub fn small_ball_probability(
    n: usize,
    k: u32,
    d: u32,
    eps: f64,
    reps: u64,
    seed: u64,
) -> SmallBallEstimate {
    small_ball_from_deviations(&sup_deviations(n, k, d, reps, seed), n, k, d, eps, seed)
}

/// Volume of the Euclidean ball of radius `r` in dimension `dim`.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    let h = dim as f64 / 2.0;
    exp(h * ln(PI) - lgamma(h + 1.0)) * crate::math::ipow(r, dim as u32)
}

/// `P(|S̄_n| ≤ r) / vol(B_r)`, an estimate of the density of `S̄_n` near 0.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DensityEstimate {
    pub n: usize,
    pub k: u32,
    pub d: u32,
    pub bin_radius: f64,
    pub dimension: usize,
    pub repetitions: u64,
    pub hit_count: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub rng: String,
}

/// Folds per-repetition Euclidean norms `|S̄_n|` into a density estimate.
pub fn density_from_norms(
    norms: &[f64],
    n: usize,
    k: u32,
    d: u32,
    bin_radius: f64,
    seed: u64,
) -> DensityEstimate {
    let dimension = crate::momentmap::moment_dimension(k, d);
    let reps = norms.len() as u64;
    let hits = norms.iter().filter(|v| **v <= bin_radius).count() as u64;
    let vol = ball_volume(dimension, bin_radius);
    let (lo, hi) = wilson_interval(hits, reps);
    DensityEstimate {
        n,
        k,
        d,
        bin_radius,
        dimension,
        repetitions: reps,
        hit_count: hits,
        estimate: hits as f64 / reps as f64 / vol,
        ci_low: lo / vol,
        ci_high: hi / vol,
        seed,
        rng: RNG_ALGORITHM.into(),
    }
}

/// Sequential density probe.
pub fn empirical_density_probe(
    n: usize,
    k: u32,
    d: u32,
    reps: u64,
    bin_radius: f64,
    seed: u64,
) -> DensityEstimate {
    let norms: Vec<f64> = (0..reps)
        .map(|r| euclidean_norm(&normalized_deviation(n, k, d, seed, r)))
        .collect();
    density_from_norms(&norms, n, k, d, bin_radius, seed)
}

/// Per-coordinate mean and standard deviation of `M_k(σ_n) − M_k(σ)` over repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentStatistics {
    pub mean: Vec<f64>,
    pub std_dev: Vec<f64>,
    pub repetitions: u64,
}

impl MomentStatistics {
    /// `|mean| / (std/√reps)` per coordinate.
    pub fn standard_scores(&self) -> Vec<f64> {
        let rr = sqrt(self.repetitions as f64);
        self.mean
            .iter()
            .zip(&self.std_dev)
            .map(|(m, s)| if *s > 0.0 { m.abs() / (s / rr) } else { 0.0 })
            .collect()
    }
}

pub fn moment_statistics(n: usize, k: u32, d: u32, reps: u64, seed: u64) -> MomentStatistics {
    let rn = sqrt(n as f64);
    let dim = crate::momentmap::moment_dimension(k, d);
    let mut sum = alloc::vec![0.0; dim];
    let mut sq = alloc::vec![0.0; dim];
    for r in 0..reps {
        for (j, v) in normalized_deviation(n, k, d, seed, r).iter().enumerate() {
            let x = v / rn;
            sum[j] += x;
            sq[j] += x * x;
        }
    }
    let nr = reps as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / nr).collect();
    let std_dev = sq
        .iter()
        .zip(&mean)
        .map(|(s, m)| sqrt(((s / nr - m * m) * nr / (nr - 1.0)).max(0.0)))
        .collect();
    MomentStatistics {
        mean,
        std_dev,
        repetitions: reps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn cube_moment_examples() {
        assert_eq!(cube_multimoments(2, 1), vec![0.0, 1.0 / 3.0]);
        assert_eq!(
            cube_multimoments(2, 2),
            vec![0.0, 0.0, 1.0 / 3.0, 0.0, 1.0 / 3.0]
        );
    }

    #[test]
    fn single_sample_is_the_point() {
        let mut a = rep_rng(7, 3);
        let mut b = rep_rng(7, 3);
        let v = sample_moment_vector(1, 3, 2, &mut a);
        let x = [2.0 * b.random::<f64>() - 1.0, 2.0 * b.random::<f64>() - 1.0];
        assert_eq!(v, MultiIndexBasis::new(3, 2).eval(&x));
    }

    #[test]
    fn wilson_edges() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(50, 100);
        assert!(lo < 0.5 && hi > 0.5);
    }

    #[test]
    fn ball_volumes() {
        assert!((ball_volume(1, 0.3) - 0.6).abs() < 1e-15);
        assert!((ball_volume(2, 1.0) - PI).abs() < 1e-14);
        assert!((ball_volume(3, 1.0) - 4.0 * PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn full_event() {
        let est = small_ball_probability(3, 2, 1, 10.0, 200, 1);
        assert_eq!(est.estimate, 1.0);
        assert_eq!(est.nearest_miss, None);
    }
}
