use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use super::record::{proxy_once, Recorder};
use super::{default_answer, forced_failure, frame_times, Behavior, Script, ScriptEntry, ScriptKey};
use crate::gateway::{CHAT_PATH, PASS_KIND_HEADER, VIDEO_ID_HEADER};
use crate::sampler::PassKind;

#[derive(Debug, Error)]
pub enum MockError {
    #[error("binding {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failure_rate must be in [0, 1], got {0}")]
    FailureRate(f64),
}

#[derive(Debug, Clone)]
pub struct MockOptions {
    /// Probability that a video's Pass-1 requests all fail with HTTP 500.
    pub failure_rate: f64,
    pub seed: u64,
    /// How long a `Timeout` step holds the connection.
    pub timeout_hold: Duration,
    /// When set, every request is forwarded here once per key and the
    /// answers are frozen into a script (see [`MockServer::recorded_script`]).
    pub record_upstream: Option<String>,
}

impl Default for MockOptions {
    fn default() -> Self {
        MockOptions {
            failure_rate: 0.0,
            seed: 0,
            timeout_hold: Duration::from_secs(30),
            record_upstream: None,
        }
    }
}

struct MockState {
    script: Script,
    options: MockOptions,
    attempts: Mutex<HashMap<ScriptKey, Arc<AtomicU32>>>,
    recorder: Option<Recorder>,
}

impl MockState {
    /// Returns the 0-based attempt index for this key and bumps the counter.
    fn next_attempt(&self, key: &ScriptKey) -> u32 {
        let counter = {
            let mut map = self.attempts.lock().unwrap_or_else(|p| p.into_inner());
            Arc::clone(map.entry(key.clone()).or_default())
        };
        counter.fetch_add(1, Ordering::SeqCst)
    }
}

/// A running mock server. Dropping it leaves the server running until the
/// runtime shuts down; call [`MockServer::shutdown`] to stop it early.
pub struct MockServer {
    addr: SocketAddr,
    state: Arc<MockState>,
    shutdown: Option<oneshot::Sender<()>>,
    handle: Option<JoinHandle<()>>,
}

fn infer_pass(request: &Value) -> PassKind {
    let text = request.to_string();
    if text.contains("frames per second\\nfrom a traffic") || text.contains("The time\\nwindow shown") {
        PassKind::Fine
    } else if text.contains("You MUST classify its type") {
        PassKind::Type
    } else {
        PassKind::Coarse
    }
}

fn envelope(model: &str, content: &str) -> Value {
    json!({
        "id": "mock-completion",
        "object": "chat.completion",
        "model": model,
        "choices": [{
            "index": 0,
            "message": {"role": "assistant", "content": content},
            "finish_reason": "stop"
        }]
    })
}

fn error_body(status: StatusCode, message: &str) -> Response {
    (status, Json(json!({"error": {"message": message}}))).into_response()
}

async fn chat(State(state): State<Arc<MockState>>, headers: HeaderMap, body: Bytes) -> Response {
    let request: Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => return error_body(StatusCode::BAD_REQUEST, &format!("invalid JSON: {e}")),
    };
    let header = |name: &str| headers.get(name).and_then(|v| v.to_str().ok()).map(str::to_string);
    let video_id = header(VIDEO_ID_HEADER).unwrap_or_default();
    let pass = header(PASS_KIND_HEADER)
        .and_then(|p| PassKind::parse(&p))
        .unwrap_or_else(|| infer_pass(&request));
    let key = (video_id.clone(), pass);
    let attempt = state.next_attempt(&key);
    let model = request["model"].as_str().unwrap_or("mock").to_string();

    if let Some(recorder) = &state.recorder {
        let step = proxy_once(&recorder.client, &recorder.upstream, &headers, &body).await;
        let response = respond(&state, &step, &model, &video_id, pass, &request).await;
        recorder.record(ScriptEntry {
            video_id,
            pass,
            step,
            sequence: None,
        });
        return response;
    }

    if pass == PassKind::Coarse && forced_failure(state.options.seed, &video_id, state.options.failure_rate) {
        return error_body(StatusCode::INTERNAL_SERVER_ERROR, "injected failure");
    }
    let step = match state.script.get(&video_id, pass) {
        Some(entry) => entry.step_for(attempt as usize).clone(),
        None => Default::default(),
    };
    respond(&state, &step, &model, &video_id, pass, &request).await
}

async fn respond(
    state: &MockState,
    step: &super::ScriptStep,
    model: &str,
    video_id: &str,
    pass: PassKind,
    request: &Value,
) -> Response {
    match step.behavior {
        Behavior::Ok => {
            let content = step
                .body
                .clone()
                .unwrap_or_else(|| default_answer(video_id, pass, &frame_times(request)));
            (StatusCode::OK, Json(envelope(model, &content))).into_response()
        }
        Behavior::Http500 => error_body(StatusCode::INTERNAL_SERVER_ERROR, "scripted 500"),
        Behavior::Http429 => error_body(StatusCode::TOO_MANY_REQUESTS, "scripted 429"),
        Behavior::Timeout => {
            tokio::time::sleep(state.options.timeout_hold).await;
            error_body(StatusCode::GATEWAY_TIMEOUT, "scripted timeout")
        }
        Behavior::Garbage => (StatusCode::OK, "<html>not a completion</html>").into_response(),
    }
}

impl MockServer {
    /// Binds `bind` (use port 0 for an ephemeral port) and starts serving.
    pub async fn start(script: Script, options: MockOptions, bind: SocketAddr) -> Result<MockServer, MockError> {
        if !(0.0..=1.0).contains(&options.failure_rate) {
            return Err(MockError::FailureRate(options.failure_rate));
        }
        let listener = tokio::net::TcpListener::bind(bind).await.map_err(|source| MockError::Bind {
            addr: bind.to_string(),
            source,
        })?;
        let addr = listener.local_addr().map_err(|source| MockError::Bind {
            addr: bind.to_string(),
            source,
        })?;
        let recorder = options.record_upstream.clone().map(Recorder::new);
        let state = Arc::new(MockState {
            script,
            options,
            attempts: Mutex::new(HashMap::new()),
            recorder,
        });
        let app = Router::new()
            .route(CHAT_PATH, post(chat))
            .route("/chat/completions", post(chat))
            .with_state(Arc::clone(&state));
        let (tx, rx) = oneshot::channel::<()>();
        let handle = tokio::spawn(async move {
            let serve = axum::serve(listener, app).with_graceful_shutdown(async {
                let _ = rx.await;
            });
            if let Err(e) = serve.await {
                tracing::error!(error = %e, "mock server stopped");
            }
        });
        tracing::info!(%addr, "mock server listening");
        Ok(MockServer {
            addr,
            state,
            shutdown: Some(tx),
            handle: Some(handle),
        })
    }

    /// Convenience for tests: loopback, ephemeral port.
    pub async fn start_local(script: Script, options: MockOptions) -> Result<MockServer, MockError> {
        MockServer::start(script, options, SocketAddr::from(([127, 0, 0, 1], 0))).await
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL, e.g. `http://127.0.0.1:8099`.
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// How many requests arrived for this key so far.
    pub fn attempts(&self, video_id: &str, pass: PassKind) -> u32 {
        let map = self.state.attempts.lock().unwrap_or_else(|p| p.into_inner());
        map.get(&(video_id.to_string(), pass))
            .map_or(0, |c| c.load(Ordering::SeqCst))
    }

    /// Total requests across all keys.
    pub fn total_requests(&self) -> u64 {
        let map = self.state.attempts.lock().unwrap_or_else(|p| p.into_inner());
        map.values().map(|c| c.load(Ordering::SeqCst) as u64).sum()
    }

    /// Entries captured in recording mode, sorted by key.
    pub fn recorded_script(&self) -> Option<Script> {
        self.state.recorder.as_ref().map(Recorder::script)
    }

    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(h) = self.handle.take() {
            let _ = h.await;
        }
    }

    /// Serves until the handle finishes (Ctrl-C handling is the caller's).
    pub async fn wait(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.await;
        }
    }
}
