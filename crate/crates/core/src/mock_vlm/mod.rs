//! A chat-completions server that replays scripted answers per
//! `(video_id, pass)` and can force seeded Pass-1 failures.
//!
//! Requests are keyed by the `x-video-id` / `x-pass-kind` headers the
//! gateway sends. Responses depend only on the key, the per-key attempt
//! number and the seed, never on arrival order, so concurrent clients see
//! the same answers run after run.
//!
//! Script files are JSONL, one entry per key:
//!
//! ```json
//! {"video_id": "v001", "pass": "coarse", "body": "{\"time\": 10, \"x\": 640, \"y\": 380, \"type\": \"single\"}"}
//! {"video_id": "v001", "pass": "fine", "sequence": [{"behavior": "http500"}, {"body": "{\"time\": 11.4, \"x\": 512, \"y\": 488}"}]}
//! ```
//!
//! A sequence is indexed by attempt; attempts past its end repeat the last
//! step. Keys without an entry get a deterministic well-formed answer built
//! from the frame tags in the request.

mod record;
mod server;

pub use record::{record_fixture, RecordRequest};
pub use server::{MockError, MockOptions, MockServer};

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::parser::CollisionType;
use crate::sampler::PassKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    #[default]
    Ok,
    Http500,
    Http429,
    /// Holds the connection past any sane client timeout.
    Timeout,
    /// HTTP 200 whose body is not a chat-completions envelope.
    Garbage,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScriptStep {
    #[serde(default)]
    pub behavior: Behavior,
    /// Answer text for `Ok`; when absent the default answer is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub video_id: String,
    pub pass: PassKind,
    #[serde(flatten)]
    pub step: ScriptStep,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<Vec<ScriptStep>>,
}

impl ScriptEntry {
    pub fn ok(video_id: &str, pass: PassKind, body: impl Into<String>) -> ScriptEntry {
        ScriptEntry {
            video_id: video_id.to_string(),
            pass,
            step: ScriptStep {
                behavior: Behavior::Ok,
                body: Some(body.into()),
            },
            sequence: None,
        }
    }

    pub fn failing(video_id: &str, pass: PassKind, behavior: Behavior) -> ScriptEntry {
        ScriptEntry {
            video_id: video_id.to_string(),
            pass,
            step: ScriptStep { behavior, body: None },
            sequence: None,
        }
    }

    pub fn sequence(video_id: &str, pass: PassKind, steps: Vec<ScriptStep>) -> ScriptEntry {
        ScriptEntry {
            video_id: video_id.to_string(),
            pass,
            step: ScriptStep::default(),
            sequence: Some(steps),
        }
    }

    /// The step for a 0-based attempt index.
    pub fn step_for(&self, attempt: usize) -> &ScriptStep {
        match &self.sequence {
            Some(seq) if !seq.is_empty() => &seq[attempt.min(seq.len() - 1)],
            _ => &self.step,
        }
    }
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("reading script {path}: {message}")]
    Read { path: String, message: String },
    #[error("script line {line}: {message}")]
    Invalid { line: usize, message: String },
}

pub type ScriptKey = (String, PassKind);

/// Immutable script store.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Script {
    entries: BTreeMap<ScriptKey, ScriptEntry>,
}

impl Script {
    pub fn from_entries<I: IntoIterator<Item = ScriptEntry>>(entries: I) -> Result<Script, ScriptError> {
        let mut out = BTreeMap::new();
        for (i, entry) in entries.into_iter().enumerate() {
            if entry.sequence.as_ref().is_some_and(Vec::is_empty) {
                return Err(ScriptError::Invalid {
                    line: i + 1,
                    message: "empty sequence".into(),
                });
            }
            let key = (entry.video_id.clone(), entry.pass);
            if out.insert(key, entry).is_some() {
                return Err(ScriptError::Invalid {
                    line: i + 1,
                    message: "duplicate (video_id, pass) entry".into(),
                });
            }
        }
        Ok(Script { entries: out })
    }

    pub fn parse(text: &str) -> Result<Script, ScriptError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ScriptEntry = serde_json::from_str(line).map_err(|e| ScriptError::Invalid {
                line: i + 1,
                message: e.to_string(),
            })?;
            entries.push(entry);
        }
        Script::from_entries(entries)
    }

    pub fn load(path: &Path) -> Result<Script, ScriptError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScriptError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Script::parse(&text)
    }

    pub fn get(&self, video_id: &str, pass: PassKind) -> Option<&ScriptEntry> {
        self.entries.get(&(video_id.to_string(), pass))
    }

    pub fn entries(&self) -> impl Iterator<Item = &ScriptEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// JSONL, sorted by key.
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for entry in self.entries.values() {
            writeln!(out, "{}", serde_json::to_string(entry).expect("entry serializes"))?;
        }
        out.flush()
    }
}

fn hash_u64(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Whether the server forces every Pass-1 attempt for `video_id` to fail.
/// Depends only on `(seed, video_id)`.
pub fn forced_failure(seed: u64, video_id: &str, failure_rate: f64) -> bool {
    let u = hash_u64(&[&seed.to_le_bytes(), video_id.as_bytes()]) as f64 / 2f64.powi(64);
    u < failure_rate
}

/// Parses `[Frame at 12.4s]` tags out of a chat-completions request body.
pub fn frame_times(request: &Value) -> Vec<f64> {
    let mut out = Vec::new();
    let Some(messages) = request["messages"].as_array() else {
        return out;
    };
    for m in messages {
        let Some(parts) = m["content"].as_array() else {
            continue;
        };
        for p in parts {
            let t = p["text"]
                .as_str()
                .and_then(|s| s.strip_prefix("[Frame at "))
                .and_then(|s| s.strip_suffix("s]"))
                .and_then(|s| s.parse::<f64>().ok());
            out.extend(t);
        }
    }
    out
}

/// The well-formed answer given to unscripted keys: a frame time picked by
/// hash and a point away from the grid edges.
pub fn default_answer(video_id: &str, pass: PassKind, frame_times: &[f64]) -> String {
    let h = hash_u64(&[video_id.as_bytes(), pass.as_str().as_bytes()]);
    let x = 100 + h % 800;
    let y = 100 + (h >> 16) % 800;
    let pick = |times: &[f64]| -> f64 {
        if times.is_empty() {
            0.0
        } else if times.len() < 3 {
            times[0]
        } else {
            // Stay off the first and last frame so the answer is not a hedge.
            times[1 + (h >> 32) as usize % (times.len() - 2)]
        }
    };
    match pass {
        PassKind::Coarse => {
            let c = CollisionType::ALL[(h >> 48) as usize % CollisionType::ALL.len()];
            format!(
                "{{\"time\": {}, \"x\": {x}, \"y\": {y}, \"type\": \"{}\"}}",
                pick(frame_times).round(),
                c.as_str()
            )
        }
        PassKind::Fine => format!("{{\"time\": {:.1}, \"x\": {x}, \"y\": {y}}}", pick(frame_times)),
        PassKind::Type => CollisionType::ALL[(h >> 40) as usize % CollisionType::ALL.len()]
            .as_str()
            .replace('-', "_"),
    }
}
