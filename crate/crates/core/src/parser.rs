//! Tolerant extraction of the JSON answers the prompts ask for.
//!
//! Model output frequently wraps the requested object in prose or markdown
//! fences. Everything here is pure: text in, validated values out.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

/// Raw coordinates live on the model's native `[0, 1000]²` grid.
pub const GRID_MAX: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("no balanced JSON object in model output")]
    NoJsonObject,
    #[error("invalid JSON: {0}")]
    InvalidJson(String),
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("key `{key}` is not numeric: {value}")]
    NotNumeric { key: &'static str, value: String },
    #[error("unknown collision type `{0}`")]
    UnknownType(String),
}

/// The closed set of collision classes. Declaration order is the fixed axis
/// order used by confusion matrices and per-type tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollisionType {
    HeadOn,
    RearEnd,
    TBone,
    Sideswipe,
    Single,
}

impl CollisionType {
    pub const ALL: [CollisionType; 5] = [
        CollisionType::HeadOn,
        CollisionType::RearEnd,
        CollisionType::TBone,
        CollisionType::Sideswipe,
        CollisionType::Single,
    ];

    /// Benchmark spelling used in prediction CSVs.
    pub fn as_str(self) -> &'static str {
        match self {
            CollisionType::HeadOn => "head-on",
            CollisionType::RearEnd => "rear-end",
            CollisionType::TBone => "t-bone",
            CollisionType::Sideswipe => "sideswipe",
            CollisionType::Single => "single",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for CollisionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CollisionType {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        normalize_type(s)
    }
}

/// Case-insensitive match against the five classes, treating `-`, `_` and
/// spaces as the same separator.
pub fn normalize_type(text: &str) -> Result<CollisionType, ParseError> {
    let key: String = text
        .trim()
        .chars()
        .filter(|c| !matches!(c, '-' | '_' | ' '))
        .flat_map(char::to_lowercase)
        .collect();
    match key.as_str() {
        "headon" => Ok(CollisionType::HeadOn),
        "rearend" => Ok(CollisionType::RearEnd),
        "tbone" => Ok(CollisionType::TBone),
        "sideswipe" => Ok(CollisionType::Sideswipe),
        "single" => Ok(CollisionType::Single),
        _ => Err(ParseError::UnknownType(text.to_string())),
    }
}

/// Parsed coarse answer. Time and coordinates are already clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pass1Result {
    pub t1: f64,
    pub raw_x1: f64,
    pub raw_y1: f64,
    pub c1: CollisionType,
}

impl Pass1Result {
    /// Clamped Pass-1 point in normalized image coordinates.
    pub fn point(&self) -> (f64, f64) {
        (self.raw_x1 / GRID_MAX, self.raw_y1 / GRID_MAX)
    }
}

/// Parsed fine answer. Nothing is clamped: the spatial gate has to see
/// out-of-range values to reject them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pass2Result {
    pub t2: f64,
    pub raw_x2: f64,
    pub raw_y2: f64,
}

impl Pass2Result {
    /// What an absent or failed fine pass collapses to.
    pub const SENTINEL: Pass2Result = Pass2Result {
        t2: -1.0,
        raw_x2: 0.0,
        raw_y2: 0.0,
    };
}

/// Returns the first balanced top-level `{...}` object in `text`, ignoring
/// braces inside JSON strings. Markdown fences and surrounding prose are
/// dropped as a side effect.
pub fn extract_json_block(text: &str) -> Result<&str, ParseError> {
    let bytes = text.as_bytes();
    let mut search_from = 0;
    while let Some(rel) = text[search_from..].find('{') {
        let start = search_from + rel;
        if let Some(end) = balanced_end(&bytes[start..]) {
            return Ok(&text[start..start + end]);
        }
        search_from = start + 1;
    }
    Err(ParseError::NoJsonObject)
}

/// Length of the balanced object starting at `bytes[0] == b'{'`, if any.
fn balanced_end(bytes: &[u8]) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_str {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_str = false;
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

fn object_of(text: &str) -> Result<Map<String, Value>, ParseError> {
    let block = extract_json_block(text)?;
    match serde_json::from_str::<Value>(block) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(other) => Err(ParseError::InvalidJson(format!("expected object, got {other}"))),
        Err(e) => Err(ParseError::InvalidJson(e.to_string())),
    }
}

fn number(map: &Map<String, Value>, key: &'static str) -> Result<f64, ParseError> {
    let value = map.get(key).ok_or(ParseError::MissingKey(key))?;
    let parsed = match value {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok(),
        _ => None,
    };
    parsed
        .filter(|v| v.is_finite())
        .ok_or_else(|| ParseError::NotNumeric {
            key,
            value: value.to_string(),
        })
}

/// Parses the coarse answer `{"time", "x", "y", "type"}`.
pub fn parse_pass1(text: &str, duration: f64) -> Result<Pass1Result, ParseError> {
    let map = object_of(text)?;
    let t1 = number(&map, "time")?;
    let raw_x1 = number(&map, "x")?;
    let raw_y1 = number(&map, "y")?;
    let c1 = match map.get("type") {
        Some(Value::String(s)) => normalize_type(s)?,
        Some(other) => return Err(ParseError::UnknownType(other.to_string())),
        None => return Err(ParseError::MissingKey("type")),
    };
    Ok(Pass1Result {
        t1: t1.clamp(0.0, duration.max(0.0)),
        raw_x1: raw_x1.clamp(0.0, GRID_MAX),
        raw_y1: raw_y1.clamp(0.0, GRID_MAX),
        c1,
    })
}

/// Parses the fine answer `{"time", "x", "y"}`; `time = -1` is the
/// model's "no collision in this window" answer and passes through.
pub fn parse_pass2(text: &str) -> Result<Pass2Result, ParseError> {
    let map = object_of(text)?;
    Ok(Pass2Result {
        t2: number(&map, "time")?,
        raw_x2: number(&map, "x")?,
        raw_y2: number(&map, "y")?,
    })
}

/// Parses the specialist's answer. The type prompt does not demand JSON, so
/// a `{"type": ...}` object is honored when present and otherwise the first
/// class name mentioned in the text wins.
pub fn parse_type_answer(text: &str) -> Result<CollisionType, ParseError> {
    if let Ok(map) = object_of(text) {
        if let Some(Value::String(s)) = map.get("type") {
            return normalize_type(s);
        }
    }
    if let Ok(c) = normalize_type(text.trim().trim_matches(|c: char| !c.is_alphanumeric())) {
        return Ok(c);
    }
    let lowered = text.to_lowercase();
    let mut best: Option<(usize, CollisionType)> = None;
    for class in CollisionType::ALL {
        for spelling in spellings(class) {
            if let Some(pos) = lowered.find(spelling) {
                if best.is_none_or(|(p, _)| pos < p) {
                    best = Some((pos, class));
                }
            }
        }
    }
    best.map(|(_, c)| c)
        .ok_or_else(|| ParseError::UnknownType(text.chars().take(80).collect()))
}

fn spellings(class: CollisionType) -> &'static [&'static str] {
    match class {
        CollisionType::HeadOn => &["head_on", "head-on", "head on"],
        CollisionType::RearEnd => &["rear_end", "rear-end", "rear end"],
        CollisionType::TBone => &["t_bone", "t-bone", "t bone"],
        CollisionType::Sideswipe => &["sideswipe", "side_swipe", "side-swipe"],
        CollisionType::Single => &["single"],
    }
}
