#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use accident_grounding::config::RunConfig;
use accident_grounding::gateway::{ContentPart, MultimodalMessage, ProviderProfile, ProviderRole};
use accident_grounding::mock_vlm::{MockOptions, MockServer, Script};
use accident_grounding::pipeline::{grounder_from_config, run_batch, BatchOutput};
use accident_grounding::sampler::PassKind;
use accident_grounding::synthetic::{generate, write_fixture, Fixture, FixturePaths, FixtureSpec};
use accident_grounding::video::VideoRecord;
use serde_json::json;

/// Defaults pointed at `url`, with millisecond backoff so retries are fast.
pub fn mock_config(url: &str) -> RunConfig {
    RunConfig::resolve([json!({
        "backoff_base_secs": 0.002,
        "grounding": {"endpoint": url},
        "typing": {"endpoint": url},
    })])
    .unwrap()
}

pub fn profile(role: ProviderRole, url: &str, max_retries: u32) -> ProviderProfile {
    let mut cfg = mock_config(url);
    cfg.max_retries = max_retries;
    let mut p = ProviderProfile::from_config(role, &cfg).unwrap();
    p.require_credentials = false;
    p
}

pub fn text_message(kind: PassKind) -> MultimodalMessage {
    MultimodalMessage {
        kind,
        parts: vec![ContentPart::Text("[Frame at 0s]".into()), ContentPart::Text("prompt".into())],
    }
}

pub struct FixtureDir {
    pub dir: tempfile::TempDir,
    pub fixture: Fixture,
    pub paths: FixturePaths,
    /// Manifest rows with absolute frame paths.
    pub videos: Vec<VideoRecord>,
}

pub fn fixture_dir(spec: &FixtureSpec) -> FixtureDir {
    let dir = tempfile::tempdir().unwrap();
    let fixture = generate(spec);
    let paths = write_fixture(&fixture, dir.path()).unwrap();
    let videos = accident_grounding::video::read_manifest(&paths.manifest).unwrap();
    FixtureDir {
        dir,
        fixture,
        paths,
        videos,
    }
}

/// A single clip over a shared frame directory.
pub fn frames_video(dir: &Path, video_id: &str, duration: f64) -> VideoRecord {
    let frames = dir.join("frames");
    if !frames.exists() {
        accident_grounding::synthetic::write_frames(&frames).unwrap();
    }
    VideoRecord {
        video_id: video_id.into(),
        path: frames,
        duration,
        width: 1280,
        height: 720,
    }
}

/// Runs one batch against a fresh mock server and returns it for
/// inspection of its request counters.
pub async fn run_with_mock(
    script: Script,
    options: MockOptions,
    videos: &[VideoRecord],
    out: &Path,
    tweak: impl FnOnce(&mut RunConfig),
) -> (BatchOutput, MockServer) {
    let server = MockServer::start_local(script, options).await.unwrap();
    let mut cfg = mock_config(&server.url());
    tweak(&mut cfg);
    let grounder = Arc::new(grounder_from_config(cfg, true).unwrap());
    let out = run_batch(grounder, videos, out).await.unwrap();
    (out, server)
}

pub fn seeded(failure_rate: f64, seed: u64) -> MockOptions {
    MockOptions {
        failure_rate,
        seed,
        timeout_hold: Duration::from_millis(200),
        record_upstream: None,
    }
}

pub fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

pub fn out_dir(root: &Path, name: &str) -> PathBuf {
    root.join(name)
}
