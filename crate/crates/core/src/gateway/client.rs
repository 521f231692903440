use std::time::{Duration, Instant};

use rand::Rng;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    GatewayError, MultimodalMessage, ProviderProfile, ProviderRole, PASS_KIND_HEADER,
    VIDEO_ID_HEADER,
};
use crate::config::ConfigError;
use crate::sampler::PassKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallOutcome {
    pub status: CallStatus,
    /// Model text; empty when the call failed.
    pub raw_text: String,
    pub attempts: u32,
    pub latency: Duration,
    /// SHA-256 of the request body, hex encoded.
    pub request_fingerprint: String,
    /// Why the last attempt failed, when it did.
    pub error: Option<String>,
}

impl CallOutcome {
    pub fn is_ok(&self) -> bool {
        self.status == CallStatus::Ok
    }
}

enum Attempt {
    Done(String),
    Retryable(String),
    Terminal(String),
}

/// Full-jitter exponential backoff: uniform in `[0, base * 2^(retry-1)]`.
pub fn backoff_delay(base: Duration, retry: u32) -> Duration {
    let cap = base.saturating_mul(1u32 << (retry.saturating_sub(1)).min(16));
    if cap.is_zero() {
        return cap;
    }
    Duration::from_secs_f64(rand::rng().random_range(0.0..=cap.as_secs_f64()))
}

fn fingerprint(body: &[u8]) -> String {
    Sha256::digest(body).iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn content_of(body: &str) -> Option<String> {
    let v: serde_json::Value = serde_json::from_str(body).ok()?;
    let content = &v["choices"][0]["message"]["content"];
    match content {
        serde_json::Value::String(s) => Some(s.clone()),
        // Some providers return content as a list of text parts.
        serde_json::Value::Array(parts) => Some(
            parts
                .iter()
                .filter_map(|p| p["text"].as_str())
                .collect::<Vec<_>>()
                .join(""),
        ),
        _ => None,
    }
}

async fn attempt_once(
    client: &reqwest::Client,
    profile: &ProviderProfile,
    body: &[u8],
    video_id: &str,
    kind: PassKind,
) -> Attempt {
    let mut req = client
        .post(&profile.endpoint)
        .timeout(profile.timeout)
        .header("content-type", "application/json")
        .header(VIDEO_ID_HEADER, video_id)
        .header(PASS_KIND_HEADER, kind.as_str())
        .body(body.to_vec());
    if let Some(key) = &profile.api_key {
        req = req.bearer_auth(key);
    }
    let resp = match req.send().await {
        Ok(r) => r,
        Err(e) => return Attempt::Retryable(format!("transport: {e}")),
    };
    let status = resp.status();
    let text = match resp.text().await {
        Ok(t) => t,
        Err(e) => return Attempt::Retryable(format!("reading body: {e}")),
    };
    if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
        return Attempt::Retryable(format!("http {}", status.as_u16()));
    }
    if !status.is_success() {
        return Attempt::Terminal(format!("http {}", status.as_u16()));
    }
    match content_of(&text) {
        Some(c) if !c.trim().is_empty() => Attempt::Done(c),
        Some(_) => Attempt::Retryable("empty completion".into()),
        None => Attempt::Retryable("malformed completion envelope".into()),
    }
}

/// At most `max_retries + 1` attempts. Transport errors, 5xx and 429 are
/// retried with backoff; other 4xx stop immediately. Failure is a value.
pub async fn call_with_retry(
    client: &reqwest::Client,
    profile: &ProviderProfile,
    video_id: &str,
    message: &MultimodalMessage,
) -> Result<CallOutcome, GatewayError> {
    if profile.require_credentials && profile.api_key.is_none() {
        return Err(ConfigError::MissingCredentials(profile.role.key_var()).into());
    }
    let body = serde_json::to_vec(&message.to_request_body(profile)).expect("request body serializes");
    let request_fingerprint = fingerprint(&body);
    let started = Instant::now();
    let mut attempts = 0;
    let mut last_error = None;
    while attempts <= profile.max_retries {
        if attempts > 0 {
            tokio::time::sleep(backoff_delay(profile.backoff_base, attempts)).await;
        }
        attempts += 1;
        match attempt_once(client, profile, &body, video_id, message.kind).await {
            Attempt::Done(text) => {
                return Ok(CallOutcome {
                    status: CallStatus::Ok,
                    raw_text: text,
                    attempts,
                    latency: started.elapsed(),
                    request_fingerprint,
                    error: None,
                })
            }
            Attempt::Retryable(e) => {
                tracing::debug!(video_id, kind = message.kind.as_str(), attempt = attempts, error = %e, "retryable failure");
                last_error = Some(e);
            }
            Attempt::Terminal(e) => {
                last_error = Some(e);
                break;
            }
        }
    }
    Ok(CallOutcome {
        status: CallStatus::Failed,
        raw_text: String::new(),
        attempts,
        latency: started.elapsed(),
        request_fingerprint,
        error: last_error,
    })
}

/// Both provider profiles plus a shared connection pool.
#[derive(Debug, Clone)]
pub struct Gateway {
    client: reqwest::Client,
    grounding: ProviderProfile,
    typing: ProviderProfile,
}

impl Gateway {
    pub fn new(grounding: ProviderProfile, typing: ProviderProfile) -> Gateway {
        Gateway {
            client: reqwest::Client::new(),
            grounding,
            typing,
        }
    }

    pub fn profile(&self, role: ProviderRole) -> &ProviderProfile {
        match role {
            ProviderRole::Grounding => &self.grounding,
            ProviderRole::Typing => &self.typing,
        }
    }

    /// Fails early when a profile needs credentials that are not set.
    pub fn check_credentials(&self) -> Result<(), ConfigError> {
        for p in [&self.grounding, &self.typing] {
            if p.require_credentials && p.api_key.is_none() {
                return Err(ConfigError::MissingCredentials(p.role.key_var()));
            }
        }
        Ok(())
    }

    pub async fn call(&self, video_id: &str, message: &MultimodalMessage) -> Result<CallOutcome, GatewayError> {
        let profile = self.profile(ProviderRole::for_pass(message.kind));
        call_with_retry(&self.client, profile, video_id, message).await
    }
}
