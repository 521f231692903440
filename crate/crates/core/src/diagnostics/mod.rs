//! Failure diagnostics over predictions, ground truth and traces: timing
//! bias, error by clip length, type confusion, per-type scores, the
//! two-channel oracle, fallback decomposition, and offline gate sweeps and
//! ablations.

mod offline;
mod table;

pub use offline::{
    ablation_report, ablation_table, check_traces, decomposition_table, fallback_decomposition, sweep_gates,
    AblationRow, DecompositionRow, SweepRow, SweepTables, DEFAULT_M_GRID, DEFAULT_TAU_GRID,
};
pub use table::{exact, fixed, Table};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{dataset_summary, EvalError, GroundTruth, PredictionRow, ScoreRow, Summary};
use crate::parser::CollisionType;

#[derive(Debug, Error)]
pub enum DiagError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("join error: {0}")]
    Join(String),
    #[error("nothing to summarize")]
    Empty,
    #[error("incomplete trace for {video_id}: {reason}")]
    IncompleteTrace { video_id: String, reason: String },
    #[error("reading {path}: {message}")]
    Read { path: String, message: String },
}

/// Pairs predictions with ground truth by `video_id`. Both sides must cover
/// the same ids; output is ordered by id.
pub fn join<'a>(preds: &'a [PredictionRow], gts: &'a [GroundTruth]) -> Result<Vec<(&'a PredictionRow, &'a GroundTruth)>, DiagError> {
    let by_id: BTreeMap<&str, &PredictionRow> = preds.iter().map(|p| (p.video_id.as_str(), p)).collect();
    if by_id.len() != preds.len() {
        return Err(DiagError::Join("duplicate video_id in predictions".into()));
    }
    if preds.len() != gts.len() {
        return Err(DiagError::Join(format!("{} predictions vs {} ground-truth rows", preds.len(), gts.len())));
    }
    let mut out: Vec<_> = gts
        .iter()
        .map(|g| {
            by_id
                .get(g.video_id.as_str())
                .map(|p| (*p, g))
                .ok_or_else(|| DiagError::Join(format!("no prediction for `{}`", g.video_id)))
        })
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err(DiagError::Empty);
    }
    out.sort_by(|a, b| a.1.video_id.cmp(&b.1.video_id));
    Ok(out)
}

pub const HIST_LO: f64 = -10.0;
pub const HIST_HI: f64 = 10.0;
pub const HIST_BIN: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedErrorStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub bin_width: f64,
    pub lo: f64,
    pub hi: f64,
    /// Counts for `[lo + k·w, lo + (k+1)·w)`.
    pub bins: Vec<usize>,
    pub underflow: usize,
    pub overflow: usize,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Histogram and location statistics of a signed error series.
pub fn error_stats(errors: &[f64]) -> Result<SignedErrorStats, DiagError> {
    if errors.is_empty() {
        return Err(DiagError::Empty);
    }
    let n_bins = ((HIST_HI - HIST_LO) / HIST_BIN).round() as usize;
    let mut bins = vec![0; n_bins];
    let (mut underflow, mut overflow) = (0, 0);
    for &e in errors {
        if e < HIST_LO {
            underflow += 1;
        } else if e >= HIST_HI {
            overflow += 1;
        } else {
            let k = (((e - HIST_LO) / HIST_BIN).floor() as usize).min(n_bins - 1);
            bins[k] += 1;
        }
    }
    Ok(SignedErrorStats {
        n: errors.len(),
        mean: errors.iter().sum::<f64>() / errors.len() as f64,
        median: median(errors),
        bin_width: HIST_BIN,
        lo: HIST_LO,
        hi: HIST_HI,
        bins,
        underflow,
        overflow,
    })
}

/// Predicted minus ground-truth time, ordered by `video_id`.
pub fn time_errors(preds: &[PredictionRow], gts: &[GroundTruth]) -> Result<Vec<(String, f64)>, DiagError> {
    Ok(join(preds, gts)?
        .into_iter()
        .map(|(p, g)| (g.video_id.clone(), p.time - g.time))
        .collect())
}

pub fn signed_error_stats(preds: &[PredictionRow], gts: &[GroundTruth]) -> Result<SignedErrorStats, DiagError> {
    let errors: Vec<f64> = time_errors(preds, gts)?.into_iter().map(|(_, e)| e).collect();
    error_stats(&errors)
}

impl SignedErrorStats {
    pub fn table(&self) -> Table {
        let mut t = Table::new("signed time error histogram (pred - gt, seconds)", &["bin_lo", "bin_hi", "count"]);
        t.push(vec!["-inf".into(), exact(self.lo), self.underflow.to_string()]);
        for (k, c) in self.bins.iter().enumerate() {
            let lo = self.lo + k as f64 * self.bin_width;
            t.push(vec![exact(lo), exact(lo + self.bin_width), c.to_string()]);
        }
        t.push(vec![exact(self.hi), "inf".into(), self.overflow.to_string()]);
        t.footnote = Some(format!("n={} mean={:+.3} median={:+.3}", self.n, self.mean, self.median));
        t
    }
}

pub const DEFAULT_DURATION_EDGES: [f64; 3] = [0.0, 10.0, 20.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationBucket {
    pub lo: f64,
    /// `None` for the open last bucket.
    pub hi: Option<f64>,
    pub n: usize,
    /// `None` when no video falls in the bucket.
    pub mae: Option<f64>,
}

/// Mean absolute time error per clip-length bucket `[edge_k, edge_k+1)`,
/// the last bucket open-ended.
pub fn mae_by_duration(
    preds: &[PredictionRow],
    gts: &[GroundTruth],
    durations: &BTreeMap<String, f64>,
    edges: &[f64],
) -> Result<Vec<DurationBucket>, DiagError> {
    let mut sums = vec![(0usize, 0.0f64); edges.len()];
    for (p, g) in join(preds, gts)? {
        let d = *durations
            .get(&g.video_id)
            .ok_or_else(|| DiagError::Join(format!("no duration for `{}`", g.video_id)))?;
        let Some(k) = edges.iter().rposition(|&e| d >= e) else {
            continue;
        };
        sums[k].0 += 1;
        sums[k].1 += (p.time - g.time).abs();
    }
    Ok(edges
        .iter()
        .enumerate()
        .map(|(k, &lo)| DurationBucket {
            lo,
            hi: edges.get(k + 1).copied(),
            n: sums[k].0,
            mae: (sums[k].0 > 0).then(|| sums[k].1 / sums[k].0 as f64),
        })
        .collect())
}

pub fn duration_table(buckets: &[DurationBucket]) -> Table {
    let mut t = Table::new("time MAE by clip length", &["bucket", "n", "mae_s"]);
    for b in buckets {
        let label = match b.hi {
            Some(hi) => format!("[{},{})", b.lo, hi),
            None => format!("[{},inf)", b.lo),
        };
        t.push(vec![label, b.n.to_string(), b.mae.map_or("absent".into(), exact)]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    /// Rows are ground truth, columns predictions, in [`CollisionType::ALL`] order.
    pub counts: [[usize; 5]; 5],
    /// Row-normalized; rows without ground-truth videos are all zero.
    pub rates: [[f64; 5]; 5],
}

impl Confusion {
    pub fn row_total(&self, gt: CollisionType) -> usize {
        self.counts[gt.index()].iter().sum()
    }

    pub fn table(&self) -> Table {
        let mut headers = vec!["gt \\ pred"];
        headers.extend(CollisionType::ALL.iter().map(|c| c.as_str()));
        headers.push("n");
        let mut t = Table::new("type confusion (row-normalized)", &headers);
        for gt in CollisionType::ALL {
            let i = gt.index();
            let mut row = vec![gt.as_str().to_string()];
            row.extend(self.rates[i].iter().map(|&r| exact(r)));
            row.push(self.row_total(gt).to_string());
            t.push(row);
        }
        t
    }
}

pub fn confusion_matrix(preds: &[PredictionRow], gts: &[GroundTruth]) -> Result<Confusion, DiagError> {
    let mut counts = [[0usize; 5]; 5];
    for (p, g) in join(preds, gts)? {
        counts[g.collision.index()][p.collision.index()] += 1;
    }
    let mut rates = [[0.0; 5]; 5];
    for (i, row) in counts.iter().enumerate() {
        let total: usize = row.iter().sum();
        if total > 0 {
            for j in 0..5 {
                rates[i][j] = row[j] as f64 / total as f64;
            }
        }
    }
    Ok(Confusion { counts, rates })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeRow {
    pub collision: CollisionType,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerTypeTable {
    /// Non-empty ground-truth classes in [`CollisionType::ALL`] order.
    pub rows: Vec<TypeRow>,
    pub pooled: Summary,
}

/// Groups score rows by ground-truth type.
pub fn per_type_table(rows: &[ScoreRow], gts: &[GroundTruth]) -> Result<PerTypeTable, DiagError> {
    let gt_type: BTreeMap<&str, CollisionType> = gts.iter().map(|g| (g.video_id.as_str(), g.collision)).collect();
    let mut groups: BTreeMap<usize, Vec<ScoreRow>> = BTreeMap::new();
    for r in rows {
        let c = gt_type
            .get(r.video_id.as_str())
            .ok_or_else(|| DiagError::Join(format!("no ground truth for `{}`", r.video_id)))?;
        groups.entry(c.index()).or_default().push(r.clone());
    }
    Ok(PerTypeTable {
        rows: groups
            .into_iter()
            .map(|(i, g)| {
                Ok(TypeRow {
                    collision: CollisionType::ALL[i],
                    summary: dataset_summary(&g)?,
                })
            })
            .collect::<Result<_, EvalError>>()?,
        pooled: dataset_summary(rows)?,
    })
}

fn summary_cells(s: &Summary) -> Vec<String> {
    vec![s.n.to_string(), exact(s.mean_t), exact(s.mean_s), exact(s.mean_c), exact(s.acc_s)]
}

impl PerTypeTable {
    pub fn table(&self) -> Table {
        let mut t = Table::new("per-type performance", &["type", "n", "T", "S", "C", "ACC_S"]);
        for r in &self.rows {
            let mut row = vec![r.collision.as_str().to_string()];
            row.extend(summary_cells(&r.summary));
            t.push(row);
        }
        let mut row = vec!["all".to_string()];
        row.extend(summary_cells(&self.pooled));
        t.push(row);
        t.footnote = Some(format!(
            "pooled ACC_S {:.4} is a mean of per-video harmonic means; the harmonic mean of the pooled T/S/C is {:.4}",
            self.pooled.acc_s, self.pooled.hm_of_means
        ));
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleMae {
    pub n: usize,
    pub mae_a: f64,
    pub mae_b: f64,
    /// Per-video `min(|a|, |b|)`, averaged.
    pub mae_oracle: f64,
}

/// Best-of-two time error per video. Both series must cover the same ids.
pub fn oracle_mae(a: &[(String, f64)], b: &[(String, f64)]) -> Result<OracleMae, DiagError> {
    let a_by: BTreeMap<&str, f64> = a.iter().map(|(id, e)| (id.as_str(), *e)).collect();
    let b_by: BTreeMap<&str, f64> = b.iter().map(|(id, e)| (id.as_str(), *e)).collect();
    if a_by.len() != a.len() || b_by.len() != b.len() {
        return Err(DiagError::Join("duplicate video_id in error series".into()));
    }
    if a_by.keys().ne(b_by.keys()) {
        return Err(DiagError::Join("error series cover different video_ids".into()));
    }
    if a_by.is_empty() {
        return Err(DiagError::Empty);
    }
    let n = a_by.len() as f64;
    let (mut sa, mut sb, mut so) = (0.0, 0.0, 0.0);
    for (id, ea) in &a_by {
        let (ea, eb) = (ea.abs(), b_by[id].abs());
        sa += ea;
        sb += eb;
        so += ea.min(eb);
    }
    Ok(OracleMae {
        n: a_by.len(),
        mae_a: sa / n,
        mae_b: sb / n,
        mae_oracle: so / n,
    })
}

/// Reads a `video_id,error` CSV (signed or absolute seconds).
pub fn read_error_series(path: &Path) -> Result<Vec<(String, f64)>, DiagError> {
    let read_err = |message: String| DiagError::Read {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| read_err(e.to_string()))?;
    let mut out = Vec::new();
    for rec in reader.deserialize::<(String, f64)>() {
        let (id, e) = rec.map_err(|e| read_err(e.to_string()))?;
        if !e.is_finite() {
            return Err(read_err(format!("non-finite error for {id}")));
        }
        out.push((id, e));
    }
    Ok(out)
}
