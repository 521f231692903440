//! Run configuration and its layered resolution.
//!
//! Layers are JSON objects merged key by key, last writer wins:
//! built-in defaults, then the config file, then command-line flags, then
//! the environment. The resolved value is validated once, before any work.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("reading config {path}: {message}")]
    Read { path: String, message: String },
    #[error("missing credentials: set {0}")]
    MissingCredentials(&'static str),
    #[error("missing endpoint for {0} provider")]
    MissingEndpoint(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FallbackMode {
    PhysicsPlugin,
    #[default]
    NaiveFill,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Workers {
    pub pass1: usize,
    pub pass2: usize,
    pub typing: usize,
}

impl Default for Workers {
    fn default() -> Self {
        Workers {
            pass1: 5,
            pass2: 5,
            typing: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderSettings {
    pub endpoint: Option<String>,
    pub model: String,
    pub timeout_secs: f64,
}

impl ProviderSettings {
    fn grounding() -> Self {
        ProviderSettings {
            endpoint: None,
            model: "qwen3-vl-plus".into(),
            timeout_secs: 60.0,
        }
    }

    fn typing() -> Self {
        ProviderSettings {
            endpoint: None,
            model: "gemini-3.1-flash-lite-preview".into(),
            timeout_secs: 60.0,
        }
    }
}

impl Default for ProviderSettings {
    fn default() -> Self {
        Self::grounding()
    }
}

/// Every knob of the grounding procedure and the metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Half-width of the refinement window, seconds.
    pub window_delta: f64,
    /// Gate 1 boundary tolerance, seconds.
    pub tau: f64,
    /// Gate 2 margin on the `[0, 1000]` grid. Zero disables the gate.
    pub margin: f64,
    pub crop_factor: f64,
    pub type_clip_fps: f64,
    pub sigma_t: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub workers: Workers,
    pub max_retries: u32,
    pub backoff_base_secs: f64,
    pub use_pass2_time: bool,
    pub use_pass2_space: bool,
    pub use_specialist_type: bool,
    pub fallback_mode: FallbackMode,
    /// Command template for the physics plugin; `{input}`, `{video_id}`,
    /// `{duration}`, `{width}`, `{height}` are substituted.
    pub fallback_cmd: Option<String>,
    /// Command template for frame decoding; `None` selects the
    /// image-directory backend.
    pub extractor_cmd: Option<String>,
    pub grounding: ProviderSettings,
    pub typing: ProviderSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            window_delta: 3.0,
            tau: 0.3,
            margin: 10.0,
            crop_factor: 2.5,
            type_clip_fps: 5.0,
            sigma_t: 1.0,
            sigma_x: 0.127,
            sigma_y: 0.119,
            workers: Workers::default(),
            max_retries: 3,
            backoff_base_secs: 1.0,
            use_pass2_time: true,
            use_pass2_space: true,
            use_specialist_type: true,
            fallback_mode: FallbackMode::NaiveFill,
            fallback_cmd: None,
            extractor_cmd: None,
            grounding: ProviderSettings::grounding(),
            typing: ProviderSettings::typing(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("window_delta", self.window_delta),
            ("tau", self.tau),
            ("type_clip_fps", self.type_clip_fps),
            ("sigma_t", self.sigma_t),
            ("sigma_x", self.sigma_x),
            ("sigma_y", self.sigma_y),
            ("grounding.timeout_secs", self.grounding.timeout_secs),
            ("typing.timeout_secs", self.typing.timeout_secs),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.margin.is_finite() && self.margin >= 0.0 && self.margin < 500.0) {
            return Err(ConfigError::Invalid(format!("margin must be in [0, 500), got {}", self.margin)));
        }
        if !(self.crop_factor.is_finite() && self.crop_factor > 1.0) {
            return Err(ConfigError::Invalid(format!("crop_factor must be > 1, got {}", self.crop_factor)));
        }
        if !(self.backoff_base_secs.is_finite() && self.backoff_base_secs >= 0.0) {
            return Err(ConfigError::Invalid("backoff_base_secs must be >= 0".into()));
        }
        let w = self.workers;
        if w.pass1 == 0 || w.pass2 == 0 || w.typing == 0 {
            return Err(ConfigError::Invalid("worker counts must be >= 1".into()));
        }
        if self.fallback_mode == FallbackMode::PhysicsPlugin && self.fallback_cmd.is_none() {
            return Err(ConfigError::Invalid(
                "fallback_mode physics_plugin requires fallback_cmd".into(),
            ));
        }
        Ok(())
    }

    /// Folds `layers` over the defaults and validates the result.
    pub fn resolve<I>(layers: I) -> Result<RunConfig, ConfigError>
    where
        I: IntoIterator<Item = Value>,
    {
        let mut merged = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
        for layer in layers {
            merge_into(&mut merged, layer);
        }
        let cfg: RunConfig =
            serde_json::from_value(merged).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load_layer(path: &Path) -> Result<Value, ConfigError> {
        let read_err = |message: String| ConfigError::Read {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| read_err(e.to_string()))?;
        let value: Value = serde_json::from_str(&text).map_err(|e| read_err(e.to_string()))?;
        if !value.is_object() {
            return Err(read_err("top level must be a JSON object".into()));
        }
        Ok(value)
    }
}

/// Environment layer: endpoints only. API keys are read at call time and
/// never enter the resolved config (which is written next to run outputs).
pub fn env_layer<F>(lookup: F) -> Value
where
    F: Fn(&str) -> Option<String>,
{
    let mut root = Map::new();
    for (var, section) in [("GROUNDING_ENDPOINT", "grounding"), ("TYPING_ENDPOINT", "typing")] {
        if let Some(url) = lookup(var).filter(|s| !s.is_empty()) {
            let mut inner = Map::new();
            inner.insert("endpoint".into(), Value::String(url));
            root.insert(section.into(), Value::Object(inner));
        }
    }
    Value::Object(root)
}

/// Recursive object merge; non-object values from `layer` replace.
pub fn merge_into(base: &mut Value, layer: Value) {
    match (base, layer) {
        (Value::Object(b), Value::Object(l)) => {
            for (k, v) in l {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge_into(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, other) => *slot = other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults_are_valid_and_match_published_values() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.window_delta, cfg.tau, cfg.margin, cfg.crop_factor), (3.0, 0.3, 10.0, 2.5));
        assert_eq!((cfg.sigma_t, cfg.sigma_x, cfg.sigma_y), (1.0, 0.127, 0.119));
        assert_eq!(cfg.workers, Workers { pass1: 5, pass2: 5, typing: 10 });
        assert_eq!(cfg.max_retries, 3);
    }

    #[test]
    fn invalid_values_are_rejected() {
        for bad in [
            json!({"tau": 0.0}),
            json!({"window_delta": -1}),
            json!({"margin": -1}),
            json!({"crop_factor": 1.0}),
            json!({"sigma_x": 0}),
            json!({"workers": {"typing": 0}}),
            json!({"fallback_mode": "physics_plugin"}),
        ] {
            assert!(RunConfig::resolve([bad.clone()]).is_err(), "{bad}");
        }
        assert!(RunConfig::resolve([json!({"margin": 0})]).is_ok());
    }

    #[test]
    fn nested_merge_keeps_siblings() {
        let cfg = RunConfig::resolve([json!({"workers": {"pass2": 7}})]).unwrap();
        assert_eq!(cfg.workers, Workers { pass1: 5, pass2: 7, typing: 10 });
    }

    #[test]
    fn layer_matrix() {
        // Non-conflicting layers commute.
        let a = json!({"tau": 0.5});
        let b = json!({"margin": 20.0});
        let c = json!({"grounding": {"model": "m"}});
        let perms = [
            [a.clone(), b.clone(), c.clone()],
            [a.clone(), c.clone(), b.clone()],
            [b.clone(), a.clone(), c.clone()],
            [b.clone(), c.clone(), a.clone()],
            [c.clone(), a.clone(), b.clone()],
            [c.clone(), b.clone(), a.clone()],
        ];
        let first = RunConfig::resolve(perms[0].clone()).unwrap();
        for p in perms {
            assert_eq!(RunConfig::resolve(p).unwrap(), first);
        }
        // Conflicting layers: last writer wins for every pair of positions.
        let file = json!({"tau": 0.1});
        let flags = json!({"tau": 0.2});
        let env = env_layer(|k| (k == "GROUNDING_ENDPOINT").then(|| "http://env".to_string()));
        let cfg = RunConfig::resolve([file.clone(), flags.clone(), env.clone()]).unwrap();
        assert_eq!(cfg.tau, 0.2);
        assert_eq!(cfg.grounding.endpoint.as_deref(), Some("http://env"));
        let cfg = RunConfig::resolve([flags, file]).unwrap();
        assert_eq!(cfg.tau, 0.1);
        let over = json!({"grounding": {"endpoint": "http://flag"}});
        let cfg = RunConfig::resolve([over.clone(), env.clone()]).unwrap();
        assert_eq!(cfg.grounding.endpoint.as_deref(), Some("http://env"));
        let cfg = RunConfig::resolve([env, over]).unwrap();
        assert_eq!(cfg.grounding.endpoint.as_deref(), Some("http://flag"));
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = RunConfig::resolve([serde_json::from_str(&text).unwrap()]).unwrap();
        assert_eq!(back, cfg);
    }
}
