//! Freezing a real endpoint's answers into a replayable script.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Duration;

use axum::http::HeaderMap;
use serde_json::Value;

use super::{Behavior, Script, ScriptEntry, ScriptKey, ScriptStep};
use crate::gateway::{content_of, normalize_endpoint, PASS_KIND_HEADER, VIDEO_ID_HEADER};
use crate::sampler::PassKind;

const PROXY_TIMEOUT: Duration = Duration::from_secs(120);

/// One request to replay against the upstream.
#[derive(Debug, Clone)]
pub struct RecordRequest {
    pub video_id: String,
    pub pass: PassKind,
    pub body: Value,
    pub api_key: Option<String>,
}

/// Sends one request upstream and turns the response into a script step.
/// Non-429 client errors and transport errors are recorded as `http500`.
pub(super) async fn proxy_once(client: &reqwest::Client, upstream: &str, headers: &HeaderMap, body: &[u8]) -> ScriptStep {
    let mut req = client
        .post(upstream)
        .timeout(PROXY_TIMEOUT)
        .header("content-type", "application/json")
        .body(body.to_vec());
    for name in [VIDEO_ID_HEADER, PASS_KIND_HEADER, "authorization"] {
        if let Some(v) = headers.get(name).and_then(|v| v.to_str().ok()) {
            req = req.header(name, v);
        }
    }
    let failed = |behavior| ScriptStep { behavior, body: None };
    let resp = match req.send().await {
        Ok(r) => r,
        Err(e) if e.is_timeout() => return failed(Behavior::Timeout),
        Err(_) => return failed(Behavior::Http500),
    };
    let status = resp.status();
    if status.as_u16() == 429 {
        return failed(Behavior::Http429);
    }
    if !status.is_success() {
        return failed(Behavior::Http500);
    }
    match resp.text().await.ok().as_deref().and_then(content_of) {
        Some(text) => ScriptStep {
            behavior: Behavior::Ok,
            body: Some(text),
        },
        None => failed(Behavior::Garbage),
    }
}

/// Accumulates every attempt per key, in arrival order.
pub(super) struct Recorder {
    pub client: reqwest::Client,
    pub upstream: String,
    steps: Mutex<BTreeMap<ScriptKey, Vec<ScriptStep>>>,
}

impl Recorder {
    pub fn new(upstream: String) -> Recorder {
        Recorder {
            client: reqwest::Client::new(),
            upstream: normalize_endpoint(&upstream),
            steps: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn record(&self, entry: ScriptEntry) {
        let mut steps = self.steps.lock().unwrap_or_else(|p| p.into_inner());
        steps.entry((entry.video_id, entry.pass)).or_default().push(entry.step);
    }

    pub fn script(&self) -> Script {
        let steps = self.steps.lock().unwrap_or_else(|p| p.into_inner());
        Script::from_entries(steps.iter().map(|((video_id, pass), seq)| {
            if seq.len() == 1 {
                ScriptEntry {
                    video_id: video_id.clone(),
                    pass: *pass,
                    step: seq[0].clone(),
                    sequence: None,
                }
            } else {
                ScriptEntry::sequence(video_id, *pass, seq.clone())
            }
        }))
        .expect("keys are unique and sequences non-empty")
    }
}

/// Proxies each request to `upstream` once and returns the frozen script.
pub async fn record_fixture(upstream: &str, requests: &[RecordRequest]) -> Script {
    let recorder = Recorder::new(upstream.to_string());
    for r in requests {
        let mut headers = HeaderMap::new();
        headers.insert(VIDEO_ID_HEADER, r.video_id.parse().expect("header-safe video id"));
        headers.insert(PASS_KIND_HEADER, r.pass.as_str().parse().expect("header-safe pass"));
        if let Some(key) = &r.api_key {
            if let Ok(v) = format!("Bearer {key}").parse() {
                headers.insert("authorization", v);
            }
        }
        let body = serde_json::to_vec(&r.body).expect("body serializes");
        let step = proxy_once(&recorder.client, &recorder.upstream, &headers, &body).await;
        recorder.record(ScriptEntry {
            video_id: r.video_id.clone(),
            pass: r.pass,
            step,
            sequence: None,
        });
    }
    recorder.script()
}
