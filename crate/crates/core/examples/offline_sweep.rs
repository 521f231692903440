//! Re-gating stored traces: threshold sweeps, the component ablation and
//! the fallback decomposition, all without calling any model.
//!
//!     cargo run --example offline_sweep

use std::sync::Arc;

use accident_grounding::config::RunConfig;
use accident_grounding::diagnostics::{
    ablation_report, ablation_table, decomposition_table, fallback_decomposition, sweep_gates, DEFAULT_M_GRID,
    DEFAULT_TAU_GRID,
};
use accident_grounding::evaluator::MetricParams;
use accident_grounding::mock_vlm::{MockOptions, MockServer};
use accident_grounding::pipeline::{grounder_from_config, read_traces, run_batch, GateParams, TRACES_FILE};
use accident_grounding::synthetic::{generate, write_fixture, FixtureSpec};
use accident_grounding::video::read_manifest;
use serde_json::json;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let fixture = generate(&FixtureSpec::default());
    let paths = write_fixture(&fixture, dir.path())?;
    let server = MockServer::start_local(
        fixture.script.clone(),
        MockOptions { failure_rate: 0.17, seed: 42, ..MockOptions::default() },
    )
    .await?;
    let cfg = RunConfig::resolve([json!({
        "backoff_base_secs": 0.01,
        "grounding": {"endpoint": server.url()},
        "typing": {"endpoint": server.url()},
    })])?;
    let run_dir = dir.path().join("run");
    run_batch(Arc::new(grounder_from_config(cfg.clone(), true)?), &read_manifest(&paths.manifest)?, &run_dir).await?;
    server.shutdown().await;

    // From here on only the trace file is used.
    let traces = read_traces(&run_dir.join(TRACES_FILE))?;
    let gts = &fixture.ground_truth;
    let gate = GateParams::from(&cfg);
    let metric = MetricParams::from(&cfg);
    for table in sweep_gates(&traces, gts, &DEFAULT_TAU_GRID, &DEFAULT_M_GRID, &gate, &metric)?.tables() {
        println!("{}", table.to_text());
    }
    let ablation = ablation_report(&traces, gts, &gate, &metric, 2.0)?;
    println!("{}", ablation_table(&ablation, cfg.sigma_t).to_text());
    println!("{}", decomposition_table(&fallback_decomposition(&traces, gts, &gate, &metric)?).to_text());
    Ok(())
}
