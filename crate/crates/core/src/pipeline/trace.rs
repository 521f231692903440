//! Per-video trace records and the JSONL trace file.
//!
//! A trace holds every raw model answer with its parsed values, which is
//! enough to re-run the gates offline under any thresholds. Wall-clock
//! latency is deliberately absent so traces are byte-reproducible; it goes
//! to the run report instead.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FallbackRecord, Prediction};
use crate::gateway::CallStatus;
use crate::parser::{CollisionType, Pass1Result, Pass2Result};
use crate::sampler::PassKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub kind: PassKind,
    /// SHA-256 of the request body; empty when no request was sent.
    pub request_fingerprint: String,
    pub status: CallStatus,
    pub attempts: u32,
    pub raw_text: String,
    /// Transport, HTTP or frame-extraction failure.
    pub error: Option<String>,
    /// Set when the call succeeded but the answer did not parse.
    pub parse_error: Option<String>,
}

impl CallRecord {
    /// Succeeded and parsed.
    pub fn usable(&self) -> bool {
        self.status == CallStatus::Ok && self.parse_error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassTrace {
    pub video_id: String,
    pub duration: f64,
    pub width: u32,
    pub height: u32,
    /// Every attempted call, in execution order.
    pub calls: Vec<CallRecord>,
    pub pass1: Option<Pass1Result>,
    pub window: Option<(f64, f64)>,
    /// `None` when the fine call failed or did not parse.
    pub pass2: Option<Pass2Result>,
    pub specialist: Option<CollisionType>,
    pub fallback: Option<FallbackRecord>,
    pub prediction: Prediction,
}

impl PassTrace {
    pub fn call(&self, kind: PassKind) -> Option<&CallRecord> {
        self.calls.iter().find(|c| c.kind == kind)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace I/O on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Malformed { path: String, line: usize, message: String },
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> TraceError + '_ {
    move |source| TraceError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads a trace file strictly: every non-empty line must parse.
pub fn read_traces(path: &Path) -> Result<Vec<PassTrace>, TraceError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let trace = serde_json::from_str(&line).map_err(|e| TraceError::Malformed {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(trace);
    }
    Ok(out)
}

/// Reads whatever complete traces survive in a possibly interrupted file.
/// Unparseable lines (a torn final write) are skipped; later duplicates win.
pub fn load_resumable(path: &Path) -> Result<BTreeMap<String, PassTrace>, TraceError> {
    let mut out = BTreeMap::new();
    if !path.exists() {
        return Ok(out);
    }
    let file = File::open(path).map_err(io_err(path))?;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err(path))?;
        if let Ok(trace) = serde_json::from_str::<PassTrace>(&line) {
            out.insert(trace.video_id.clone(), trace);
        }
    }
    Ok(out)
}

/// Writes traces sorted by `video_id` via a temp file and rename.
pub fn write_canonical(path: &Path, traces: &BTreeMap<String, PassTrace>) -> Result<(), TraceError> {
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp).map_err(io_err(&tmp))?);
        for trace in traces.values() {
            writeln!(w, "{}", trace.to_line()).map_err(io_err(&tmp))?;
        }
        w.flush().map_err(io_err(&tmp))?;
    }
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

/// Append-only sink used while a batch is running.
pub struct TraceSink {
    file: std::sync::Mutex<File>,
}

impl TraceSink {
    pub fn open(path: &Path) -> Result<TraceSink, TraceError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err(path))?;
        Ok(TraceSink {
            file: std::sync::Mutex::new(file),
        })
    }

    pub fn append(&self, trace: &PassTrace) -> std::io::Result<()> {
        let mut line = trace.to_line();
        line.push('\n');
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        f.write_all(line.as_bytes())?;
        f.flush()
    }
}
