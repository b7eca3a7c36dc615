//! Percentile bootstrap confidence intervals.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::util::mix_seed;

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = (q * (sorted.len() as f64 - 1.0)).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

fn interval(mut stats: Vec<f64>, alpha: f64) -> (f64, f64) {
    stats.sort_by(f64::total_cmp);
    (
        percentile(&stats, alpha / 2.0),
        percentile(&stats, 1.0 - alpha / 2.0),
    )
}

/// Percentile bootstrap interval at level `1 - alpha` for an arbitrary
/// statistic. The resampling unit is the sample element (for message-level
/// tables, one element per message). Deterministic given `seed`, regardless
/// of thread count: each resample draws from its own derived RNG stream.
///
/// Fewer than two samples yield the degenerate interval `(value, value)`.
pub fn bootstrap_ci(
    samples: &[f64],
    statistic: impl Fn(&[f64]) -> f64 + Sync,
    num_resamples: usize,
    alpha: f64,
    seed: u64,
) -> (f64, f64) {
    assert!(num_resamples >= 100, "num_resamples must be >= 100");
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must be in (0, 1)");
    if samples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    if samples.len() == 1 {
        let v = statistic(samples);
        return (v, v);
    }
    let n = samples.len();
    let stats: Vec<f64> = (0..num_resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, i as u64));
            let resample: Vec<f64> = (0..n)
                .map(|_| samples[rng.random_range(0..n)])
                .collect();
            statistic(&resample)
        })
        .collect();
    interval(stats, alpha)
}

/// Bootstrap interval for the sample mean.
///
/// For 0/1 indicator samples the resampled count is drawn directly from the
/// exact Binomial resampling distribution, which avoids materializing each
/// resample.
pub fn bootstrap_mean_ci(samples: &[f64], num_resamples: usize, alpha: f64, seed: u64) -> (f64, f64) {
    assert!(num_resamples >= 100, "num_resamples must be >= 100");
    if samples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    if samples.len() == 1 {
        return (samples[0], samples[0]);
    }
    let n = samples.len();
    let binary = samples.iter().all(|&v| v == 0.0 || v == 1.0);
    let stats: Vec<f64> = if binary {
        let ones = samples.iter().filter(|&&v| v == 1.0).count() as u64;
        let p = ones as f64 / n as f64;
        if p == 0.0 || p == 1.0 {
            return (p, p);
        }
        let dist = Binomial::new(n as u64, p).expect("valid binomial");
        (0..num_resamples)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, i as u64));
                dist.sample(&mut rng) as f64 / n as f64
            })
            .collect()
    } else {
        (0..num_resamples)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, i as u64));
                let sum: f64 = (0..n).map(|_| samples[rng.random_range(0..n)]).sum();
                sum / n as f64
            })
            .collect()
    };
    interval(stats, alpha)
}
