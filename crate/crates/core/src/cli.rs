//! Command-line entry point: `run`, `score`, `diagnose`, `sweep`, `ablate`
//! and `mock-serve`.
//!
//! Exit codes: 0 on success, 1 on a validation problem (missing flag, bad
//! config, unreadable argument), 2 on a runtime failure. Errors are printed
//! as one line on stderr: `error[validation]: ...` or `error[runtime]: ...`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::config::{env_layer, FallbackMode, RunConfig};
use crate::diagnostics::{
    self, ablation_report, ablation_table, confusion_matrix, decomposition_table, duration_table,
    fallback_decomposition, mae_by_duration, oracle_mae, per_type_table, read_error_series, signed_error_stats,
    sweep_gates, time_errors, Table, DEFAULT_DURATION_EDGES, DEFAULT_M_GRID, DEFAULT_TAU_GRID,
};
use crate::evaluator::{
    bootstrap_ci, dataset_summary, paired_bootstrap, read_ground_truth, read_predictions, score_all, MetricParams,
    ScoreRow,
};
use crate::mock_vlm::{MockOptions, MockServer, Script};
use crate::pipeline::{grounder_from_config, read_traces, run_batch, GateParams, PassTrace};
use crate::video::read_manifest;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    /// Single line, safe to grep.
    pub fn line(&self) -> String {
        let (kind, msg) = match self {
            CliError::Validation(m) => ("validation", m),
            CliError::Runtime(m) => ("runtime", m),
        };
        format!("error[{kind}]: {}", msg.split_whitespace().collect::<Vec<_>>().join(" "))
    }
}

fn invalid(msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(msg.to_string())
}

fn runtime(msg: impl std::fmt::Display) -> CliError {
    CliError::Runtime(msg.to_string())
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| invalid(format!("missing required flag {flag}")))
}

#[derive(Debug, Parser)]
#[command(name = "accident-grounding", version, about = "Two-pass VLM grounding of traffic-accident videos")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ground every video in a manifest.
    Run(RunArgs),
    /// Score a predictions CSV against ground truth.
    Score(ScoreArgs),
    /// Failure diagnostics: timing bias, length buckets, confusion, oracle, fallback share.
    Diagnose(DiagnoseArgs),
    /// Re-gate stored traces over grids of tau and m.
    Sweep(SweepArgs),
    /// Re-derive the component ablation from stored traces.
    Ablate(AblateArgs),
    /// Serve scripted chat-completions answers.
    MockServe(MockServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FallbackArg {
    Naive,
    Plugin,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// JSON config file; flags and environment override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Send both providers' calls to this mock server; no credentials needed.
    #[arg(long)]
    mock_endpoint: Option<String>,
    #[arg(long, value_enum)]
    fallback: Option<FallbackArg>,
    /// Plugin command for `--fallback plugin`.
    #[arg(long)]
    fallback_cmd: Option<String>,
    /// Frame extraction command template for media files.
    #[arg(long)]
    extractor_cmd: Option<String>,
    /// Score the run against this ground truth when done.
    #[arg(long)]
    gt: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    pred: Option<PathBuf>,
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Metric sigmas come from here when given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the temporal sigma of the config.
    #[arg(long)]
    sigma_t: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Second predictions file for a paired bootstrap against `--pred`.
    #[arg(long, alias = "paired")]
    compare: Option<PathBuf>,
    /// Writes summary.json, scores.csv and per_type.csv here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    #[arg(long)]
    pred: Option<PathBuf>,
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Enables the fallback decomposition and supplies clip durations.
    #[arg(long)]
    traces: Option<PathBuf>,
    /// Clip durations, when no traces are given.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// `video_id,error` CSV of a second time predictor for the oracle.
    #[arg(long)]
    second_errors: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    traces: Option<PathBuf>,
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Defaults to the `config.json` next to the traces, then built-ins.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    tau_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    m_grid: Option<Vec<f64>>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[arg(long)]
    traces: Option<PathBuf>,
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    sigma_t_alt: f64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MockServeArgs {
    /// JSONL script; without one every request gets the default answer.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    failure_rate: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 8099)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    #[arg(long, default_value_t = 30.0)]
    timeout_hold_secs: f64,
    /// Proxy to this endpoint and record its answers instead of replaying.
    #[arg(long)]
    record_upstream: Option<String>,
    /// Where the recorded script goes on Ctrl-C.
    #[arg(long)]
    record_out: Option<PathBuf>,
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("{}", invalid(first).line());
            return 1;
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Score(a) => cmd_score(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::MockServe(a) => cmd_mock_serve(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}

fn tokio_runtime() -> Result<tokio::runtime::Runtime, CliError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(runtime)
}

/// Defaults < file < flags < environment; a mock endpoint beats everything
/// because it is an explicit request to stay offline.
fn resolve_config(file: Option<&Path>, flags: Value, mock_endpoint: Option<&str>) -> Result<RunConfig, CliError> {
    let mut layers = Vec::new();
    if let Some(path) = file {
        layers.push(RunConfig::load_layer(path).map_err(invalid)?);
    }
    layers.push(flags);
    layers.push(env_layer(|k| std::env::var(k).ok()));
    if let Some(url) = mock_endpoint {
        layers.push(json!({"grounding": {"endpoint": url}, "typing": {"endpoint": url}}));
    }
    RunConfig::resolve(layers).map_err(invalid)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn emit_tables(tables: &[(&str, Table)], out_dir: Option<&Path>) -> Result<(), CliError> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    }
    for (name, table) in tables {
        println!("{}", table.to_text());
        if let Some(dir) = out_dir {
            write_file(&dir.join(format!("{name}.csv")), &table.to_csv())?;
        }
    }
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<(), CliError> {
    let manifest = required(a.manifest, "--manifest")?;
    let out = required(a.out, "--out")?;
    let mut flags = serde_json::Map::new();
    match a.fallback {
        Some(FallbackArg::Naive) => {
            flags.insert("fallback_mode".into(), json!(FallbackMode::NaiveFill));
        }
        Some(FallbackArg::Plugin) => {
            flags.insert("fallback_mode".into(), json!(FallbackMode::PhysicsPlugin));
        }
        None => {}
    }
    if let Some(cmd) = a.fallback_cmd {
        flags.insert("fallback_cmd".into(), json!(cmd));
    }
    if let Some(cmd) = a.extractor_cmd {
        flags.insert("extractor_cmd".into(), json!(cmd));
    }
    let cfg = resolve_config(a.config.as_deref(), Value::Object(flags), a.mock_endpoint.as_deref())?;
    let videos = read_manifest(&manifest).map_err(invalid)?;

    let grounder = Arc::new(grounder_from_config(cfg.clone(), a.mock_endpoint.is_some()).map_err(invalid)?);

    let output = tokio_runtime()?
        .block_on(run_batch(grounder, &videos, &out))
        .map_err(runtime)?;
    let r = &output.report;
    println!(
        "grounded {} videos ({} resumed, {} executed); pass1 failure rate {:.3}; fallback used {}; outputs in {}",
        r.videos,
        r.resumed,
        r.executed,
        r.pass1.failure_rate,
        r.fallback_used,
        out.display()
    );
    if let Some(gt) = a.gt {
        let gts = read_ground_truth(&gt).map_err(invalid)?;
        let rows: Vec<_> = output.predictions.iter().map(|p| p.to_row()).collect();
        let scores = score_all(&rows, &gts, &MetricParams::from(&cfg)).map_err(runtime)?;
        let s = dataset_summary(&scores).map_err(runtime)?;
        println!("T={:.4} S={:.4} C={:.4} ACC_S={:.4}", s.mean_t, s.mean_s, s.mean_c, s.acc_s);
    }
    Ok(())
}

fn metric_params(config: Option<&Path>, sigma_t: Option<f64>) -> Result<MetricParams, CliError> {
    let flags = match sigma_t {
        Some(s) => json!({ "sigma_t": s }),
        None => json!({}),
    };
    Ok(MetricParams::from(&resolve_config(config, flags, None)?))
}

fn score_rows_table(rows: &[ScoreRow]) -> Table {
    let mut t = Table::new("per-video scores", &["video_id", "T", "S", "C", "hm"]);
    for r in rows {
        t.push(vec![
            r.video_id.clone(),
            diagnostics::exact(r.t),
            diagnostics::exact(r.s),
            diagnostics::exact(r.c),
            diagnostics::exact(r.hm),
        ]);
    }
    t
}

fn cmd_score(a: ScoreArgs) -> Result<(), CliError> {
    let pred = required(a.pred, "--pred")?;
    let gt = required(a.gt, "--gt")?;
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(invalid(format!("--level must be in (0, 1), got {}", a.level)));
    }
    let params = metric_params(a.config.as_deref(), a.sigma_t)?;
    let preds = read_predictions(&pred).map_err(invalid)?;
    let gts = read_ground_truth(&gt).map_err(invalid)?;
    let rows = score_all(&preds, &gts, &params).map_err(runtime)?;
    let summary = dataset_summary(&rows).map_err(runtime)?;
    let (lo, hi) = bootstrap_ci(&rows, a.bootstrap, a.level, a.seed).map_err(runtime)?;
    println!(
        "n={} T={:.4} S={:.4} C={:.4} ACC_S={:.4} ci{:.0}=[{:.4}, {:.4}] (B={}, seed={})",
        summary.n,
        summary.mean_t,
        summary.mean_s,
        summary.mean_c,
        summary.acc_s,
        a.level * 100.0,
        lo,
        hi,
        a.bootstrap,
        a.seed
    );
    let per_type = per_type_table(&rows, &gts).map_err(runtime)?;
    println!("{}", per_type.table().to_text());

    let mut paired = None;
    if let Some(other) = a.compare {
        let other_preds = read_predictions(&other).map_err(invalid)?;
        let other_rows = score_all(&other_preds, &gts, &params).map_err(runtime)?;
        let p = paired_bootstrap(&rows, &other_rows, a.bootstrap, a.seed).map_err(runtime)?;
        println!("paired: delta_ACC_S={:+.4} p={:.4} (B={})", p.delta_mean, p.p_two_sided, p.n_resamples);
        paired = Some(p);
    }
    if let Some(dir) = a.out_dir {
        std::fs::create_dir_all(&dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
        let doc = json!({
            "summary": summary,
            "ci": {"level": a.level, "lo": lo, "hi": hi, "resamples": a.bootstrap, "seed": a.seed},
            "per_type": per_type,
            "paired": paired,
        });
        write_file(&dir.join("summary.json"), &(serde_json::to_string_pretty(&doc).expect("json") + "\n"))?;
        write_file(&dir.join("scores.csv"), &score_rows_table(&rows).to_csv())?;
        write_file(&dir.join("per_type.csv"), &per_type.table().to_csv())?;
    }
    Ok(())
}

fn load_traces(path: &Path) -> Result<Vec<PassTrace>, CliError> {
    if !path.exists() {
        return Err(invalid(format!("traces file {} does not exist", path.display())));
    }
    read_traces(path).map_err(runtime)
}

/// Explicit config, else the one a `run` froze next to its traces.
fn offline_config(config: Option<&Path>, traces: &Path) -> Result<RunConfig, CliError> {
    let frozen = traces.parent().map(|d| d.join("config.json")).filter(|p| p.exists());
    resolve_config(config.or(frozen.as_deref()), json!({}), None)
}

fn cmd_diagnose(a: DiagnoseArgs) -> Result<(), CliError> {
    let pred = required(a.pred, "--pred")?;
    let gt = required(a.gt, "--gt")?;
    let preds = read_predictions(&pred).map_err(invalid)?;
    let gts = read_ground_truth(&gt).map_err(invalid)?;
    let traces = a.traces.as_deref().map(load_traces).transpose()?;
    let cfg = match &a.traces {
        Some(t) => offline_config(a.config.as_deref(), t)?,
        None => resolve_config(a.config.as_deref(), json!({}), None)?,
    };
    let params = MetricParams::from(&cfg);

    let mut tables = Vec::new();
    let signed = signed_error_stats(&preds, &gts).map_err(runtime)?;
    println!(
        "signed time error: n={} mean={:+.3}s median={:+.3}s",
        signed.n, signed.mean, signed.median
    );
    tables.push(("signed_error", signed.table()));

    let durations: Option<BTreeMap<String, f64>> = match (&traces, &a.manifest) {
        (Some(t), _) => Some(t.iter().map(|t| (t.video_id.clone(), t.duration)).collect()),
        (None, Some(m)) => Some(
            read_manifest(m)
                .map_err(invalid)?
                .into_iter()
                .map(|v| (v.video_id, v.duration))
                .collect(),
        ),
        (None, None) => None,
    };
    if let Some(d) = &durations {
        let buckets = mae_by_duration(&preds, &gts, d, &DEFAULT_DURATION_EDGES).map_err(runtime)?;
        tables.push(("mae_by_duration", duration_table(&buckets)));
    }
    tables.push(("confusion", confusion_matrix(&preds, &gts).map_err(runtime)?.table()));
    let rows = score_all(&preds, &gts, &params).map_err(runtime)?;
    tables.push(("per_type", per_type_table(&rows, &gts).map_err(runtime)?.table()));

    if let Some(path) = &a.second_errors {
        let other = read_error_series(path).map_err(invalid)?;
        let ours = time_errors(&preds, &gts).map_err(runtime)?;
        let o = oracle_mae(&other, &ours).map_err(runtime)?;
        let mut t = Table::new("oracle time MAE", &["n", "mae_second", "mae_vlm", "mae_oracle"]);
        t.push(vec![
            o.n.to_string(),
            diagnostics::exact(o.mae_a),
            diagnostics::exact(o.mae_b),
            diagnostics::exact(o.mae_oracle),
        ]);
        tables.push(("oracle", t));
    }
    if let Some(traces) = &traces {
        let rows = fallback_decomposition(traces, &gts, &GateParams::from(&cfg), &params).map_err(runtime)?;
        tables.push(("fallback_decomposition", decomposition_table(&rows)));
    }
    emit_tables(&tables, a.out_dir.as_deref())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), CliError> {
    let traces_path = required(a.traces, "--traces")?;
    let gt = required(a.gt, "--gt")?;
    let cfg = offline_config(a.config.as_deref(), &traces_path)?;
    let gts = read_ground_truth(&gt).map_err(invalid)?;
    let traces = load_traces(&traces_path)?;
    let tau_grid = a.tau_grid.unwrap_or_else(|| DEFAULT_TAU_GRID.to_vec());
    let m_grid = a.m_grid.unwrap_or_else(|| DEFAULT_M_GRID.to_vec());
    if let Some(bad) = tau_grid.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(invalid(format!("--tau-grid values must be > 0, got {bad}")));
    }
    if let Some(bad) = m_grid.iter().find(|m| !(m.is_finite() && (0.0..500.0).contains(*m))) {
        return Err(invalid(format!("--m-grid values must be in [0, 500), got {bad}")));
    }
    let tables = sweep_gates(&traces, &gts, &tau_grid, &m_grid, &GateParams::from(&cfg), &MetricParams::from(&cfg))
        .map_err(runtime)?
        .tables();
    let [tau, m] = tables;
    emit_tables(&[("sweep_tau", tau), ("sweep_m", m)], a.out_dir.as_deref())
}

fn cmd_ablate(a: AblateArgs) -> Result<(), CliError> {
    let traces_path = required(a.traces, "--traces")?;
    let gt = required(a.gt, "--gt")?;
    if !(a.sigma_t_alt.is_finite() && a.sigma_t_alt > 0.0) {
        return Err(invalid("--sigma-t-alt must be > 0"));
    }
    let cfg = offline_config(a.config.as_deref(), &traces_path)?;
    let gts = read_ground_truth(&gt).map_err(invalid)?;
    let traces = load_traces(&traces_path)?;
    let rows = ablation_report(&traces, &gts, &GateParams::from(&cfg), &MetricParams::from(&cfg), a.sigma_t_alt)
        .map_err(runtime)?;
    emit_tables(&[("ablation", ablation_table(&rows, cfg.sigma_t))], a.out_dir.as_deref())
}

fn cmd_mock_serve(a: MockServeArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&a.failure_rate) {
        return Err(invalid(format!("--failure-rate must be in [0, 1], got {}", a.failure_rate)));
    }
    if a.record_out.is_some() != a.record_upstream.is_some() {
        return Err(invalid("--record-upstream and --record-out go together"));
    }
    let script = match &a.script {
        Some(p) => Script::load(p).map_err(invalid)?,
        None => Script::default(),
    };
    let bind: SocketAddr = format!("{}:{}", a.bind, a.port)
        .parse()
        .map_err(|e| invalid(format!("--bind/--port: {e}")))?;
    let options = MockOptions {
        failure_rate: a.failure_rate,
        seed: a.seed,
        timeout_hold: Duration::from_secs_f64(a.timeout_hold_secs.max(0.0)),
        record_upstream: a.record_upstream.clone(),
    };
    tokio_runtime()?.block_on(async move {
        let server = MockServer::start(script, options, bind).await.map_err(runtime)?;
        println!("mock server listening on {}", server.url());
        tokio::signal::ctrl_c().await.map_err(runtime)?;
        if let (Some(out), Some(recorded)) = (&a.record_out, server.recorded_script()) {
            let file = std::fs::File::create(out).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
            recorded.write(file).map_err(runtime)?;
            println!("recorded {} entries to {}", recorded.len(), out.display());
        }
        server.shutdown().await;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_lines_are_single_line() {
        let e = CliError::Runtime("a\nb   c".into());
        assert_eq!(e.line(), "error[runtime]: a b c");
        assert_eq!(e.exit_code(), 2);
        assert_eq!(invalid("x").exit_code(), 1);
    }

    #[test]
    fn missing_flags_are_validation_errors() {
        assert_eq!(dispatch(["accident-grounding", "run", "--out", "/tmp/x"]), 1);
        assert_eq!(dispatch(["accident-grounding", "score", "--pred", "p.csv"]), 1);
        assert_eq!(dispatch(["accident-grounding", "sweep", "--gt", "g.csv"]), 1);
        assert_eq!(dispatch(["accident-grounding", "frobnicate"]), 1);
        assert_eq!(dispatch(["accident-grounding", "score", "--help"]), 0);
    }
}
