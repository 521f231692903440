//! Batch runs over a manifest with resumable per-video traces.
//!
//! Output directory layout:
//! `predictions.csv`, `traces.jsonl`, `report.json`, `config.json`.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::task::JoinSet;

use super::trace::{load_resumable, write_canonical, PassTrace, TraceError, TraceSink};
use super::{Grounder, Prediction, StageLatency};
use crate::evaluator::write_predictions;
use crate::gateway::CallStatus;
use crate::sampler::PassKind;
use crate::video::VideoRecord;

pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const TRACES_FILE: &str = "traces.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("writing predictions: {0}")]
    Csv(#[from] csv::Error),
    #[error("grounding task panicked: {0}")]
    Task(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub calls: usize,
    pub failed: usize,
    pub parse_failed: usize,
    pub attempts: u64,
    /// Failed or unparseable calls over all calls of this stage.
    pub failure_rate: f64,
    /// Over videos executed in this run; resumed videos have no timing.
    pub mean_latency_secs: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub videos: usize,
    pub resumed: usize,
    pub executed: usize,
    pub pass1: StageStats,
    pub pass2: StageStats,
    pub typing: StageStats,
    pub fallback_used: usize,
    pub fallback_plugin_errors: usize,
    pub wall_secs: f64,
}

pub struct BatchOutput {
    /// Ordered by `video_id`.
    pub predictions: Vec<Prediction>,
    pub traces: BTreeMap<String, PassTrace>,
    pub report: RunReport,
}

fn stage_stats(traces: &BTreeMap<String, PassTrace>, kind: PassKind, latencies: &[Duration]) -> StageStats {
    let mut s = StageStats::default();
    for call in traces.values().flat_map(|t| t.calls.iter()).filter(|c| c.kind == kind) {
        s.calls += 1;
        s.attempts += call.attempts as u64;
        if call.status == CallStatus::Failed {
            s.failed += 1;
        } else if call.parse_error.is_some() {
            s.parse_failed += 1;
        }
    }
    if s.calls > 0 {
        s.failure_rate = (s.failed + s.parse_failed) as f64 / s.calls as f64;
    }
    if !latencies.is_empty() {
        s.mean_latency_secs =
            Some(latencies.iter().map(Duration::as_secs_f64).sum::<f64>() / latencies.len() as f64);
    }
    s
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), BatchError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n").map_err(|source| BatchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Grounds every video in `videos`, skipping those that already have a
/// complete trace in `out_dir`. Each finished video is appended to the trace
/// file immediately, so an interrupted run loses at most the in-flight
/// videos. At the end the trace file is rewritten sorted by `video_id`.
pub async fn run_batch(grounder: Arc<Grounder>, videos: &[VideoRecord], out_dir: &Path) -> Result<BatchOutput, BatchError> {
    let started = Instant::now();
    std::fs::create_dir_all(out_dir).map_err(|source| BatchError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    write_json(&out_dir.join(CONFIG_FILE), &grounder.cfg)?;

    let trace_path = out_dir.join(TRACES_FILE);
    let wanted: HashSet<&str> = videos.iter().map(|v| v.video_id.as_str()).collect();
    let mut traces: BTreeMap<String, PassTrace> = load_resumable(&trace_path)?
        .into_iter()
        .filter(|(id, _)| wanted.contains(id.as_str()))
        .collect();
    let resumed = traces.len();
    // Drop stale or torn lines before appending.
    write_canonical(&trace_path, &traces)?;
    let sink = Arc::new(TraceSink::open(&trace_path)?);

    let mut tasks = JoinSet::new();
    for video in videos.iter().filter(|v| !traces.contains_key(&v.video_id)) {
        let g = Arc::clone(&grounder);
        let sink = Arc::clone(&sink);
        let video = video.clone();
        tasks.spawn(async move {
            let outcome = g.ground_video(video).await;
            let written = sink.append(&outcome.trace);
            (outcome, written)
        });
    }
    let todo = tasks.len();
    tracing::info!(videos = videos.len(), resumed, todo, "batch started");

    let mut latencies: Vec<StageLatency> = Vec::with_capacity(todo);
    let mut done = 0usize;
    while let Some(joined) = tasks.join_next().await {
        let (outcome, written) = joined.map_err(|e| BatchError::Task(e.to_string()))?;
        written.map_err(|source| BatchError::Io {
            path: trace_path.clone(),
            source,
        })?;
        done += 1;
        if done.is_multiple_of(50) || done == todo {
            tracing::info!(done, todo, "videos grounded");
        }
        latencies.push(outcome.latency);
        traces.insert(outcome.trace.video_id.clone(), outcome.trace);
    }
    drop(sink);
    write_canonical(&trace_path, &traces)?;

    let predictions: Vec<Prediction> = traces.values().map(|t| t.prediction.clone()).collect();
    let rows: Vec<_> = predictions.iter().map(Prediction::to_row).collect();
    let pred_path = out_dir.join(PREDICTIONS_FILE);
    let file = std::fs::File::create(&pred_path).map_err(|source| BatchError::Io {
        path: pred_path.clone(),
        source,
    })?;
    write_predictions(std::io::BufWriter::new(file), &rows)?;

    let lat = |f: fn(&StageLatency) -> Option<Duration>| latencies.iter().filter_map(f).collect::<Vec<_>>();
    let report = RunReport {
        videos: traces.len(),
        resumed,
        executed: todo,
        pass1: stage_stats(&traces, PassKind::Coarse, &lat(|l| l.pass1)),
        pass2: stage_stats(&traces, PassKind::Fine, &lat(|l| l.pass2)),
        typing: stage_stats(&traces, PassKind::Type, &lat(|l| l.typing)),
        fallback_used: traces.values().filter(|t| t.fallback.is_some()).count(),
        fallback_plugin_errors: traces
            .values()
            .filter(|t| t.fallback.as_ref().is_some_and(|f| f.error.is_some()))
            .count(),
        wall_secs: started.elapsed().as_secs_f64(),
    };
    write_json(&out_dir.join(REPORT_FILE), &report)?;
    tracing::info!(
        pass1_failure_rate = report.pass1.failure_rate,
        fallback_used = report.fallback_used,
        "batch finished"
    );
    Ok(BatchOutput {
        predictions,
        traces,
        report,
    })
}
