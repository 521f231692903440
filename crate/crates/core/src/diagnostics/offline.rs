//! Analyses that re-derive predictions from stored traces. Nothing here
//! calls a model: every variant reuses the recorded pass answers and goes
//! through the same `regate` the online pipeline used.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::table::{exact, Table};
use super::DiagError;
use crate::evaluator::{dataset_summary, score_all, GroundTruth, MetricParams, PredictionRow, ScoreRow, Summary};
use crate::pipeline::{naive_fill, regate, GateParams, PassTrace};
use crate::sampler::PassKind;
use crate::video::VideoRecord;

pub const DEFAULT_TAU_GRID: [f64; 5] = [0.1, 0.2, 0.3, 0.5, 1.0];
pub const DEFAULT_M_GRID: [f64; 5] = [0.0, 5.0, 10.0, 20.0, 50.0];

/// Checks that every ground-truth video has a usable trace and returns the
/// traces keyed by id (extra traces are dropped). A usable trace has a
/// Pass-1 call record and either a parsed Pass-1 answer or a fallback.
pub fn check_traces<'a>(traces: &'a [PassTrace], gts: &'a [GroundTruth]) -> Result<BTreeMap<&'a str, &'a PassTrace>, DiagError> {
    let by_id: BTreeMap<&str, &PassTrace> = traces.iter().map(|t| (t.video_id.as_str(), t)).collect();
    let mut out = BTreeMap::new();
    for g in gts {
        let incomplete = |reason: &str| DiagError::IncompleteTrace {
            video_id: g.video_id.clone(),
            reason: reason.to_string(),
        };
        let t = by_id.get(g.video_id.as_str()).ok_or_else(|| incomplete("no trace"))?;
        if t.call(PassKind::Coarse).is_none() {
            return Err(incomplete("missing Pass-1 record"));
        }
        if t.pass1.is_none() && t.fallback.is_none() {
            return Err(incomplete("Pass-1 failed and no fallback was recorded"));
        }
        out.insert(g.video_id.as_str(), *t);
    }
    if out.is_empty() {
        return Err(DiagError::Empty);
    }
    Ok(out)
}

fn rescore(
    traces: &BTreeMap<&str, &PassTrace>,
    gts: &[GroundTruth],
    gate: &GateParams,
    metric: &MetricParams,
) -> Result<Vec<ScoreRow>, DiagError> {
    let preds: Vec<PredictionRow> = traces.values().map(|t| regate(t, gate).to_row()).collect();
    Ok(score_all(&preds, gts, metric)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: f64,
    pub margin: f64,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTables {
    /// τ varied, margin at its base value.
    pub tau: Vec<SweepRow>,
    /// Margin varied, τ at its base value.
    pub margin: Vec<SweepRow>,
}

fn sweep_table(title: &str, rows: &[SweepRow]) -> Table {
    let mut t = Table::new(title, &["tau", "m", "T", "S", "C", "ACC_S"]);
    for r in rows {
        let s = &r.summary;
        t.push(vec![exact(r.tau), exact(r.margin), exact(s.mean_t), exact(s.mean_s), exact(s.mean_c), exact(s.acc_s)]);
    }
    t
}

impl SweepTables {
    pub fn tables(&self) -> [Table; 2] {
        [
            sweep_table("sensitivity to tau (m fixed)", &self.tau),
            sweep_table("sensitivity to m (tau fixed)", &self.margin),
        ]
    }
}

/// One-at-a-time threshold sweeps. Grid points are evaluated in parallel
/// and reported in grid order.
pub fn sweep_gates(
    traces: &[PassTrace],
    gts: &[GroundTruth],
    tau_grid: &[f64],
    m_grid: &[f64],
    base: &GateParams,
    metric: &MetricParams,
) -> Result<SweepTables, DiagError> {
    let by_id = check_traces(traces, gts)?;
    let points: Vec<GateParams> = tau_grid
        .iter()
        .map(|&tau| GateParams { tau, ..*base })
        .chain(m_grid.iter().map(|&margin| GateParams { margin, ..*base }))
        .collect();
    let results: Vec<Result<SweepRow, DiagError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = points
            .iter()
            .map(|p| {
                let by_id = &by_id;
                scope.spawn(move || {
                    let rows = rescore(by_id, gts, p, metric)?;
                    Ok(SweepRow {
                        tau: p.tau,
                        margin: p.margin,
                        summary: dataset_summary(&rows)?,
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let mut rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let margin = rows.split_off(tau_grid.len());
    Ok(SweepTables { tau: rows, margin })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub use_specialist_type: bool,
    pub use_pass2_time: bool,
    pub use_pass2_space: bool,
    /// Scored with the run's `sigma_t`.
    pub summary: Summary,
    /// Scored with the alternate `sigma_t`.
    pub summary_alt: Summary,
    pub sigma_t_alt: f64,
}

/// The four cumulative configurations: Pass 1 only, then specialist typing,
/// then Pass-2 time, then Pass-2 space.
pub fn ablation_report(
    traces: &[PassTrace],
    gts: &[GroundTruth],
    base: &GateParams,
    metric: &MetricParams,
    sigma_t_alt: f64,
) -> Result<Vec<AblationRow>, DiagError> {
    let by_id = check_traces(traces, gts)?;
    let configs = [
        ("pass1_only", false, false, false),
        ("+specialist_type", true, false, false),
        ("+pass2_time", true, true, false),
        ("+pass2_space", true, true, true),
    ];
    let alt = MetricParams { sigma_t: sigma_t_alt, ..*metric };
    configs
        .iter()
        .map(|&(name, ty, time, space)| {
            let gate = GateParams {
                use_specialist_type: ty,
                use_pass2_time: time,
                use_pass2_space: space,
                ..*base
            };
            Ok(AblationRow {
                name: name.to_string(),
                use_specialist_type: ty,
                use_pass2_time: time,
                use_pass2_space: space,
                summary: dataset_summary(&rescore(&by_id, gts, &gate, metric)?)?,
                summary_alt: dataset_summary(&rescore(&by_id, gts, &gate, &alt)?)?,
                sigma_t_alt,
            })
        })
        .collect()
}

pub fn ablation_table(rows: &[AblationRow], sigma_t: f64) -> Table {
    let alt = rows.first().map_or(2.0, |r| r.sigma_t_alt);
    let t_main = format!("T(sigma_t={sigma_t})");
    let t_alt = format!("T(sigma_t={alt})");
    let acc_main = format!("ACC_S(sigma_t={sigma_t})");
    let acc_alt = format!("ACC_S(sigma_t={alt})");
    let mut t = Table::new(
        "component ablation",
        &["config", &t_main, &t_alt, "S", "C", &acc_main, &acc_alt],
    );
    for r in rows {
        t.push(vec![
            r.name.clone(),
            exact(r.summary.mean_t),
            exact(r.summary_alt.mean_t),
            exact(r.summary.mean_s),
            exact(r.summary.mean_c),
            exact(r.summary.acc_s),
            exact(r.summary_alt.acc_s),
        ]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    pub subset: String,
    /// `None` when the subset is empty.
    pub summary: Option<Summary>,
}

/// Scores the Pass-1 successes, the fallback rows, everything, and the
/// counterfactual where fallback rows are replaced by the naive fill.
pub fn fallback_decomposition(
    traces: &[PassTrace],
    gts: &[GroundTruth],
    gate: &GateParams,
    metric: &MetricParams,
) -> Result<Vec<DecompositionRow>, DiagError> {
    let by_id = check_traces(traces, gts)?;
    let fallback_ids: BTreeSet<&str> = by_id
        .iter()
        .filter(|(_, t)| t.pass1.is_none())
        .map(|(id, _)| *id)
        .collect();
    let full = rescore(&by_id, gts, gate, metric)?;
    let counterfactual: Vec<PredictionRow> = by_id
        .values()
        .map(|t| {
            if t.pass1.is_some() {
                return regate(t, gate).to_row();
            }
            let video = VideoRecord {
                video_id: t.video_id.clone(),
                path: Default::default(),
                duration: t.duration,
                width: t.width,
                height: t.height,
            };
            let g = naive_fill(&video);
            PredictionRow { video_id: t.video_id.clone(), time: g.time, x: g.x, y: g.y, collision: g.collision }
        })
        .collect();
    let cf_rows = score_all(&counterfactual, gts, metric)?;
    let subset = |pick: &dyn Fn(&ScoreRow) -> bool| -> Option<Summary> {
        let rows: Vec<ScoreRow> = full.iter().filter(|r| pick(r)).cloned().collect();
        dataset_summary(&rows).ok()
    };
    Ok(vec![
        DecompositionRow {
            subset: "pass1_vlm".into(),
            summary: subset(&|r| !fallback_ids.contains(r.video_id.as_str())),
        },
        DecompositionRow {
            subset: "fallback".into(),
            summary: subset(&|r| fallback_ids.contains(r.video_id.as_str())),
        },
        DecompositionRow {
            subset: "full".into(),
            summary: dataset_summary(&full).ok(),
        },
        DecompositionRow {
            subset: "vlm_plus_naive_fill".into(),
            summary: dataset_summary(&cf_rows).ok(),
        },
    ])
}

pub fn decomposition_table(rows: &[DecompositionRow]) -> Table {
    let mut t = Table::new("fallback contribution", &["subset", "n", "T", "S", "C", "ACC_S"]);
    for r in rows {
        let mut cells = vec![r.subset.clone()];
        match &r.summary {
            Some(s) => cells.extend([s.n.to_string(), exact(s.mean_t), exact(s.mean_s), exact(s.mean_c), exact(s.acc_s)]),
            None => cells.extend(["0".to_string(), "absent".into(), "absent".into(), "absent".into(), "absent".into()]),
        }
        t.push(cells);
    }
    t
}
