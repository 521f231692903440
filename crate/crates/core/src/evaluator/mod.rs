//! Benchmark metric: per-video Gaussian time and space similarity, top-1
//! type accuracy, and their harmonic mean averaged over videos.
//!
//! Dataset-level `T`, `S`, `C` are plain means of the per-video components.
//! `ACC^S` is the mean of per-video harmonic means, which in general is not
//! the harmonic mean of the component means.

mod bootstrap;
mod io;

pub use bootstrap::{bootstrap_ci, paired_bootstrap, percentile_interval, PairedBootstrap};
pub use io::{read_ground_truth, read_predictions, write_predictions};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::parser::CollisionType;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("join error: {0}")]
    Join(String),
    #[error("no rows to summarize")]
    Empty,
    #[error("reading {path}: {message}")]
    Read { path: String, message: String },
    #[error("{path} row {row}: {message}")]
    InvalidRow { path: String, row: usize, message: String },
}

/// One row of a predictions CSV (`video_id,time,x,y,type`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub video_id: String,
    pub time: f64,
    pub x: f64,
    pub y: f64,
    #[serde(rename = "type")]
    pub collision: CollisionType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub video_id: String,
    pub time: f64,
    pub x: f64,
    pub y: f64,
    #[serde(rename = "type")]
    pub collision: CollisionType,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub sigma_t: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            sigma_t: 1.0,
            sigma_x: 0.127,
            sigma_y: 0.119,
        }
    }
}

impl From<&RunConfig> for MetricParams {
    fn from(cfg: &RunConfig) -> Self {
        MetricParams {
            sigma_t: cfg.sigma_t,
            sigma_x: cfg.sigma_x,
            sigma_y: cfg.sigma_y,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub video_id: String,
    pub t: f64,
    pub s: f64,
    pub c: f64,
    pub hm: f64,
}

/// Unnormalized Gaussian kernel, so a perfect prediction scores exactly 1.
pub fn temporal_score(t_pred: f64, t_gt: f64, sigma_t: f64) -> f64 {
    let d = t_pred - t_gt;
    (-(d * d) / (2.0 * sigma_t * sigma_t)).exp()
}

/// Anisotropic Gaussian; product of the per-axis kernels.
pub fn spatial_score(pred: (f64, f64), gt: (f64, f64), sigma_x: f64, sigma_y: f64) -> f64 {
    let dx = pred.0 - gt.0;
    let dy = pred.1 - gt.1;
    (-(dx * dx / (2.0 * sigma_x * sigma_x) + dy * dy / (2.0 * sigma_y * sigma_y))).exp()
}

pub fn type_score(pred: CollisionType, gt: CollisionType) -> f64 {
    if pred == gt {
        1.0
    } else {
        0.0
    }
}

/// Harmonic mean of three scores, defined as 0 when any score is 0.
pub fn harmonic_mean(t: f64, s: f64, c: f64) -> f64 {
    if t <= 0.0 || s <= 0.0 || c <= 0.0 {
        0.0
    } else {
        3.0 / (1.0 / t + 1.0 / s + 1.0 / c)
    }
}

pub fn score_video(pred: &PredictionRow, gt: &GroundTruth, params: &MetricParams) -> Result<ScoreRow, EvalError> {
    if pred.video_id != gt.video_id {
        return Err(EvalError::Join(format!(
            "prediction `{}` scored against ground truth `{}`",
            pred.video_id, gt.video_id
        )));
    }
    let t = temporal_score(pred.time, gt.time, params.sigma_t);
    let s = spatial_score((pred.x, pred.y), (gt.x, gt.y), params.sigma_x, params.sigma_y);
    let c = type_score(pred.collision, gt.collision);
    Ok(ScoreRow {
        video_id: pred.video_id.clone(),
        t,
        s,
        c,
        hm: harmonic_mean(t, s, c),
    })
}

/// Joins predictions to ground truth by `video_id` (both must cover the
/// same ids) and scores each video. Output is ordered by `video_id`.
pub fn score_all(preds: &[PredictionRow], gts: &[GroundTruth], params: &MetricParams) -> Result<Vec<ScoreRow>, EvalError> {
    let by_id: BTreeMap<&str, &PredictionRow> = preds.iter().map(|p| (p.video_id.as_str(), p)).collect();
    if by_id.len() != preds.len() {
        return Err(EvalError::Join("duplicate video_id in predictions".into()));
    }
    let gt_by_id: BTreeMap<&str, &GroundTruth> = gts.iter().map(|g| (g.video_id.as_str(), g)).collect();
    if gt_by_id.len() != gts.len() {
        return Err(EvalError::Join("duplicate video_id in ground truth".into()));
    }
    if let Some(extra) = by_id.keys().find(|id| !gt_by_id.contains_key(*id)) {
        return Err(EvalError::Join(format!("prediction for `{extra}` has no ground truth")));
    }
    gt_by_id
        .iter()
        .map(|(id, gt)| {
            let pred = by_id
                .get(id)
                .ok_or_else(|| EvalError::Join(format!("no prediction for `{id}`")))?;
            score_video(pred, gt, params)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean_t: f64,
    pub mean_s: f64,
    pub mean_c: f64,
    /// Mean of per-video harmonic means.
    pub acc_s: f64,
    /// Harmonic mean of the component means, reported for contrast only.
    pub hm_of_means: f64,
}

pub fn dataset_summary(rows: &[ScoreRow]) -> Result<Summary, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&ScoreRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let (mean_t, mean_s, mean_c) = (mean(|r| r.t), mean(|r| r.s), mean(|r| r.c));
    Ok(Summary {
        n: rows.len(),
        mean_t,
        mean_s,
        mean_c,
        acc_s: mean(|r| r.hm),
        hm_of_means: harmonic_mean(mean_t, mean_s, mean_c),
    })
}
