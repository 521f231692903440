//! Predictors used when the coarse pass fails.
//!
//! The detector/tracker fallback lives outside this crate. Any program that
//! prints a prediction row can be plugged in with [`CommandFallback`];
//! [`NaiveFill`] is the built-in default.

use std::collections::HashMap;
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parser::{normalize_type, CollisionType};
use crate::video::VideoRecord;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FallbackError {
    #[error("fallback plugin for {video_id} failed: {reason}")]
    Plugin { video_id: String, reason: String },
    #[error("no scripted fallback row for {0}")]
    NoRow(String),
}

/// A fallback's answer, in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FallbackGuess {
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub collision: CollisionType,
}

pub trait FallbackPredictor: Send + Sync {
    fn predict(&self, video: &VideoRecord) -> Result<FallbackGuess, FallbackError>;

    /// True for the trivial midpoint/center/majority filler.
    fn is_naive(&self) -> bool {
        false
    }
}

/// Midpoint time, image center, majority class `single`.
pub fn naive_fill(video: &VideoRecord) -> FallbackGuess {
    FallbackGuess {
        time: video.duration / 2.0,
        x: 0.5,
        y: 0.5,
        collision: CollisionType::Single,
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NaiveFill;

impl FallbackPredictor for NaiveFill {
    fn predict(&self, video: &VideoRecord) -> Result<FallbackGuess, FallbackError> {
        Ok(naive_fill(video))
    }

    fn is_naive(&self) -> bool {
        true
    }
}

/// Canned answers keyed by `video_id`; unknown ids fail.
#[derive(Debug, Default, Clone)]
pub struct ScriptedFallback {
    pub rows: HashMap<String, FallbackGuess>,
}

impl FallbackPredictor for ScriptedFallback {
    fn predict(&self, video: &VideoRecord) -> Result<FallbackGuess, FallbackError> {
        self.rows
            .get(&video.video_id)
            .copied()
            .ok_or_else(|| FallbackError::NoRow(video.video_id.clone()))
    }
}

/// Runs a shell command template per video. Placeholders: `{input}`,
/// `{video_id}`, `{duration}`, `{width}`, `{height}`. The last non-header
/// line of stdout must be `time,x,y,type` or `video_id,time,x,y,type`.
#[derive(Debug, Clone)]
pub struct CommandFallback {
    template: String,
}

impl CommandFallback {
    pub fn new(template: impl Into<String>) -> Self {
        CommandFallback {
            template: template.into(),
        }
    }

    fn render(&self, video: &VideoRecord) -> String {
        let quote = |s: &str| format!("'{}'", s.replace('\'', r"'\''"));
        self.template
            .replace("{input}", &quote(&video.path.to_string_lossy()))
            .replace("{video_id}", &quote(&video.video_id))
            .replace("{duration}", &video.duration.to_string())
            .replace("{width}", &video.width.to_string())
            .replace("{height}", &video.height.to_string())
    }
}

/// Parses one plugin output row and clamps it into the valid ranges.
pub fn parse_fallback_row(line: &str, video: &VideoRecord) -> Result<FallbackGuess, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    let fields = match fields.len() {
        4 => &fields[..],
        5 => &fields[1..],
        n => return Err(format!("expected 4 or 5 fields, got {n}")),
    };
    let num = |s: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("not a number: {s}"))
    };
    Ok(FallbackGuess {
        time: num(fields[0])?.clamp(0.0, video.duration),
        x: num(fields[1])?.clamp(0.0, 1.0),
        y: num(fields[2])?.clamp(0.0, 1.0),
        collision: normalize_type(fields[3]).map_err(|e| e.to_string())?,
    })
}

impl FallbackPredictor for CommandFallback {
    fn predict(&self, video: &VideoRecord) -> Result<FallbackGuess, FallbackError> {
        let fail = |reason: String| FallbackError::Plugin {
            video_id: video.video_id.clone(),
            reason,
        };
        let out = Command::new("sh")
            .arg("-c")
            .arg(self.render(video))
            .output()
            .map_err(|e| fail(e.to_string()))?;
        if !out.status.success() {
            return Err(fail(format!("exit status {}", out.status)));
        }
        let stdout = String::from_utf8_lossy(&out.stdout);
        let line = stdout
            .lines()
            .rev()
            .map(str::trim)
            .find(|l| !l.is_empty() && !l.starts_with("video_id") && !l.starts_with("time"))
            .ok_or_else(|| fail("empty output".into()))?;
        parse_fallback_row(line, video).map_err(fail)
    }
}
