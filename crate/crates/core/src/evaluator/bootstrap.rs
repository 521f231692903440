//! Percentile bootstrap over videos and a paired bootstrap for comparing two
//! systems on the same videos. A single ChaCha stream drives each call, so
//! results are reproducible across platforms for a given seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EvalError, ScoreRow};

fn resample_mean(values: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    let n = values.len();
    let mut sum = 0.0;
    for _ in 0..n {
        sum += values[rng.random_range(0..n)];
    }
    sum / n as f64
}

/// Percentile interval for the mean per-video harmonic mean.
pub fn bootstrap_ci(rows: &[ScoreRow], n_resamples: usize, level: f64, seed: u64) -> Result<(f64, f64), EvalError> {
    if rows.is_empty() {
        return Err(EvalError::Empty);
    }
    let values: Vec<f64> = rows.iter().map(|r| r.hm).collect();
    Ok(percentile_interval(&values, n_resamples, level, seed))
}

/// Percentile bootstrap of the mean of `values`.
pub fn percentile_interval(values: &[f64], n_resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    let b = n_resamples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..b).map(|_| resample_mean(values, &mut rng)).collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level).clamp(0.0, 1.0);
    let lo_idx = ((alpha / 2.0) * b as f64).floor() as usize;
    let hi_idx = (((1.0 - alpha / 2.0) * b as f64).ceil() as usize).saturating_sub(1);
    (means[lo_idx.min(b - 1)], means[hi_idx.min(b - 1)])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedBootstrap {
    /// Observed mean of `hm_a - hm_b`.
    pub delta_mean: f64,
    /// Doubled one-sided tail of resampled deltas on the far side of zero,
    /// floored at `1 / n_resamples`.
    pub p_two_sided: f64,
    pub n_resamples: usize,
}

/// Resamples video indices jointly for both systems.
pub fn paired_bootstrap(
    rows_a: &[ScoreRow],
    rows_b: &[ScoreRow],
    n_resamples: usize,
    seed: u64,
) -> Result<PairedBootstrap, EvalError> {
    let mut a: Vec<&ScoreRow> = rows_a.iter().collect();
    let mut b: Vec<&ScoreRow> = rows_b.iter().collect();
    a.sort_by(|x, y| x.video_id.cmp(&y.video_id));
    b.sort_by(|x, y| x.video_id.cmp(&y.video_id));
    if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.video_id != y.video_id) {
        return Err(EvalError::Join("paired bootstrap needs identical video_id sets".into()));
    }
    if a.is_empty() {
        return Err(EvalError::Empty);
    }
    let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.hm - y.hm).collect();
    let observed = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let n = n_resamples.max(1);
    let floor = 1.0 / n as f64;
    if observed == 0.0 {
        return Ok(PairedBootstrap { delta_mean: 0.0, p_two_sided: 1.0, n_resamples: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flips = (0..n)
        .filter(|_| {
            let d = resample_mean(&diffs, &mut rng);
            if observed > 0.0 {
                d <= 0.0
            } else {
                d >= 0.0
            }
        })
        .count();
    let p = (2.0 * flips as f64 / n as f64).clamp(floor, 1.0);
    Ok(PairedBootstrap {
        delta_mean: observed,
        p_two_sided: p,
        n_resamples: n,
    })
}
