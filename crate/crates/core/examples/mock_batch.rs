//! A full batch against the bundled mock server: synthetic clips, scripted
//! answers with injected coarse failures, traces on disk, and a score.
//!
//!     cargo run --example mock_batch [-- OUT_DIR]

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use accident_grounding::config::RunConfig;
use accident_grounding::evaluator::{dataset_summary, score_all, MetricParams, PredictionRow};
use accident_grounding::mock_vlm::{MockOptions, MockServer};
use accident_grounding::pipeline::{grounder_from_config, run_batch};
use accident_grounding::synthetic::{generate, write_fixture, FixtureSpec};
use accident_grounding::video::read_manifest;
use serde_json::json;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let root = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("grounding-demo"));
    let fixture = generate(&FixtureSpec { n_videos: 40, ..FixtureSpec::default() });
    let paths = write_fixture(&fixture, &root)?;
    let videos = read_manifest(&paths.manifest)?;

    let options = MockOptions {
        failure_rate: 0.17,
        seed: 42,
        timeout_hold: Duration::from_secs(1),
        record_upstream: None,
    };
    let server = MockServer::start_local(fixture.script.clone(), options).await?;
    let cfg = RunConfig::resolve([json!({
        "backoff_base_secs": 0.01,
        "grounding": {"endpoint": server.url()},
        "typing": {"endpoint": server.url()},
    })])?;
    let grounder = Arc::new(grounder_from_config(cfg, true)?);
    let out = run_batch(grounder, &videos, &root.join("run")).await?;

    let r = &out.report;
    println!("{} clips, {} mock requests", r.videos, server.total_requests());
    println!(
        "coarse failure rate {:.2}, fine failure rate {:.2}, typing failure rate {:.2}, fallback used {}",
        r.pass1.failure_rate, r.pass2.failure_rate, r.typing.failure_rate, r.fallback_used
    );
    let rows: Vec<PredictionRow> = out.predictions.iter().map(|p| p.to_row()).collect();
    let s = dataset_summary(&score_all(&rows, &fixture.ground_truth, &MetricParams::default())?)?;
    println!("T={:.3} S={:.3} C={:.3} ACC_S={:.3}", s.mean_t, s.mean_s, s.mean_c, s.acc_s);
    println!("outputs in {}", root.join("run").display());
    server.shutdown().await;
    Ok(())
}
