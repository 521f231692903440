//! Multimodal requests to the grounding and typing providers.
//!
//! Wire format is a minimal chat-completions body:
//!
//! ```json
//! {"model": "...", "temperature": 0.1, "max_tokens": 256,
//!  "messages": [{"role": "user", "content": [
//!     {"type": "text", "text": "[Frame at 0s]"},
//!     {"type": "image_url", "image_url": {"url": "data:image/jpeg;base64,..."}},
//!     ...,
//!     {"type": "text", "text": "<prompt>"}]}]}
//! ```
//!
//! The response is read from `choices[0].message.content`. Requests also
//! carry `X-Video-Id` and `X-Pass-Kind` headers so replay servers can key
//! scripted answers by content rather than arrival order.

mod client;
mod prompts;

pub use client::{backoff_delay, call_with_retry, CallOutcome, CallStatus, Gateway};
pub(crate) use client::content_of;
pub use prompts::{
    format_prompt_seconds, render_prompt, PromptTemplate, COARSE_TEMPLATE, FINE_TEMPLATE,
    TYPE_TEMPLATE,
};

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, ProviderSettings, RunConfig};
use crate::sampler::{FrameSet, PassKind};

pub const TEMPERATURE: f64 = 0.1;
pub const GROUNDING_MAX_TOKENS: u32 = 256;
pub const TYPING_MAX_TOKENS: u32 = 1024;
pub const GROUNDING_KEY_VAR: &str = "GROUNDING_API_KEY";
pub const TYPING_KEY_VAR: &str = "TYPING_API_KEY";
pub const VIDEO_ID_HEADER: &str = "x-video-id";
pub const PASS_KIND_HEADER: &str = "x-pass-kind";
pub const CHAT_PATH: &str = "/v1/chat/completions";

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid gateway input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderRole {
    Grounding,
    Typing,
}

impl ProviderRole {
    pub fn for_pass(kind: PassKind) -> ProviderRole {
        match kind {
            PassKind::Coarse | PassKind::Fine => ProviderRole::Grounding,
            PassKind::Type => ProviderRole::Typing,
        }
    }

    pub fn key_var(self) -> &'static str {
        match self {
            ProviderRole::Grounding => GROUNDING_KEY_VAR,
            ProviderRole::Typing => TYPING_KEY_VAR,
        }
    }
}

/// One provider endpoint. Sampling temperature and token limits are fixed
/// per role and are not configurable.
#[derive(Debug, Clone)]
pub struct ProviderProfile {
    pub role: ProviderRole,
    pub endpoint: String,
    pub model: String,
    pub timeout: std::time::Duration,
    pub max_retries: u32,
    pub backoff_base: std::time::Duration,
    pub api_key: Option<String>,
    pub require_credentials: bool,
}

impl ProviderProfile {
    pub fn from_config(role: ProviderRole, cfg: &RunConfig) -> Result<ProviderProfile, ConfigError> {
        let settings: &ProviderSettings = match role {
            ProviderRole::Grounding => &cfg.grounding,
            ProviderRole::Typing => &cfg.typing,
        };
        let endpoint = settings.endpoint.clone().ok_or(match role {
            ProviderRole::Grounding => ConfigError::MissingEndpoint("grounding"),
            ProviderRole::Typing => ConfigError::MissingEndpoint("typing"),
        })?;
        Ok(ProviderProfile {
            role,
            endpoint: normalize_endpoint(&endpoint),
            model: settings.model.clone(),
            timeout: std::time::Duration::from_secs_f64(settings.timeout_secs),
            max_retries: cfg.max_retries,
            backoff_base: std::time::Duration::from_secs_f64(cfg.backoff_base_secs),
            api_key: std::env::var(role.key_var()).ok().filter(|k| !k.is_empty()),
            require_credentials: true,
        })
    }

    pub fn temperature(&self) -> f64 {
        TEMPERATURE
    }

    pub fn max_tokens(&self) -> u32 {
        match self.role {
            ProviderRole::Grounding => GROUNDING_MAX_TOKENS,
            ProviderRole::Typing => TYPING_MAX_TOKENS,
        }
    }
}

/// Appends the chat-completions path to a bare `scheme://host:port` URL.
pub fn normalize_endpoint(url: &str) -> String {
    let trimmed = url.trim_end_matches('/');
    let after_scheme = trimmed.split_once("://").map_or(trimmed, |(_, rest)| rest);
    if after_scheme.contains('/') {
        trimmed.to_string()
    } else {
        format!("{trimmed}{CHAT_PATH}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContentPart {
    Text(String),
    Image { mime: &'static str, data: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalMessage {
    pub kind: PassKind,
    pub parts: Vec<ContentPart>,
}

impl MultimodalMessage {
    pub fn tags(&self) -> Vec<&str> {
        self.parts
            .iter()
            .filter_map(|p| match p {
                ContentPart::Text(t) if t.starts_with("[Frame at ") => Some(t.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn to_request_body(&self, profile: &ProviderProfile) -> Value {
        let content: Vec<Value> = self
            .parts
            .iter()
            .map(|p| match p {
                ContentPart::Text(t) => json!({"type": "text", "text": t}),
                ContentPart::Image { mime, data } => json!({
                    "type": "image_url",
                    "image_url": {"url": format!(
                        "data:{mime};base64,{}",
                        base64::engine::general_purpose::STANDARD.encode(data)
                    )}
                }),
            })
            .collect();
        json!({
            "model": profile.model,
            "temperature": profile.temperature(),
            "max_tokens": profile.max_tokens(),
            "messages": [{"role": "user", "content": content}],
        })
    }
}

fn sniff_mime(data: &[u8]) -> &'static str {
    if data.starts_with(&[0x89, b'P', b'N', b'G']) {
        "image/png"
    } else {
        "image/jpeg"
    }
}

/// Interleaves `[Frame at <t>s]` tags with their images, then the prompt.
pub fn build_message(prompt: &str, frames: &FrameSet, kind: PassKind) -> Result<MultimodalMessage, GatewayError> {
    if frames.is_empty() {
        return Err(GatewayError::InvalidInput("empty frame set".into()));
    }
    let mut parts = Vec::with_capacity(frames.len() * 2 + 1);
    for f in &frames.frames {
        parts.push(ContentPart::Text(format!("[Frame at {}s]", kind.format_timestamp(f.timestamp))));
        parts.push(ContentPart::Image {
            mime: sniff_mime(&f.image),
            data: f.image.clone(),
        });
    }
    parts.push(ContentPart::Text(prompt.to_string()));
    Ok(MultimodalMessage { kind, parts })
}
