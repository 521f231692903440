//! Acceptance suite. Runs every criterion, prints one PASS/FAIL/SKIP line
//! each, and exits non-zero if any criterion fails.
//!
//! Criterion 10 needs externally released prediction and ground-truth CSVs.
//! Point `ACCEPTANCE_REPLICATION_PRED` and `ACCEPTANCE_REPLICATION_GT` at
//! them, or place them at `data/replication/predictions.csv` and
//! `data/replication/ground_truth.csv` under the workspace root.

mod common;

use std::collections::BTreeSet;
use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use accident_grounding::config::RunConfig;
use accident_grounding::diagnostics::{ablation_report, oracle_mae, sweep_gates};
use accident_grounding::evaluator::{
    bootstrap_ci, dataset_summary, harmonic_mean, paired_bootstrap, percentile_interval, score_all, score_video,
    spatial_score, temporal_score, GroundTruth, MetricParams, PredictionRow, ScoreRow,
};
use accident_grounding::gates::{gate1_temporal, gate2_spatial, Source};
use accident_grounding::gateway::{render_prompt, PromptTemplate};
use accident_grounding::mock_vlm::forced_failure;
use accident_grounding::parser::{CollisionType, Pass2Result};
use accident_grounding::pipeline::{read_traces, GateParams, PREDICTIONS_FILE, TRACES_FILE};
use accident_grounding::sampler::PassKind;
use accident_grounding::synthetic::FixtureSpec;
use accident_grounding::video::VideoRecord;
use common::{fixture_dir, read, run_with_mock, seeded};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Verdict;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn verdict(r: Result<String, String>) -> Verdict {
    match r {
        Ok(detail) => Verdict::Pass(detail),
        Err(e) => Verdict::Fail(e),
    }
}

fn within_budget(started: Instant, budget: Duration) -> Result<(), String> {
    let took = started.elapsed();
    ensure(took < budget, || format!("took {took:.2?}, budget {budget:?}"))
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()
        .unwrap()
}

// 1 -------------------------------------------------------------------------

/// Everything in integer microseconds, so the reference decision is exact.
fn gate1_reference(t1: i64, t2: i64, w: (i64, i64), tau: i64) -> (i64, Source) {
    if t2 < 0 || (t2 - w.0).abs() < tau || (t2 - w.1).abs() < tau {
        (t1, Source::Pass1)
    } else {
        (t2, Source::Pass2)
    }
}

fn gate2_reference(raw1: (f64, f64), raw2: (f64, f64), m: f64) -> ((f64, f64), Source) {
    let ok = |v: f64| v >= m && v <= 1000.0 - m;
    if m == 0.0 || (ok(raw2.0) && ok(raw2.1)) {
        ((raw2.0 / 1000.0, raw2.1 / 1000.0), Source::Pass2)
    } else {
        ((raw1.0 / 1000.0, raw1.1 / 1000.0), Source::Pass1)
    }
}

fn criterion_gates() -> Verdict {
    let started = Instant::now();
    let us = |v: i64| v as f64 / 1e6;
    let windows = [(0, 6_000_000), (7_000_000, 13_000_000), (4_200_000, 10_200_000), (23_000_000, 26_800_000)];
    let taus = [100_000, 200_000, 300_000, 500_000, 1_000_000];
    let epsilons = [1, 1_000, 10_000];
    let mut cases = 0;
    let result = (|| {
        for w in windows {
            let t1 = (w.0 + w.1) / 2;
            for tau in taus {
                let mut t2s = vec![-1_000_000, 0, w.0, w.1, t1];
                for edge in [w.0, w.1] {
                    for sign in [-1, 1] {
                        let at = edge + sign * tau;
                        t2s.push(at);
                        for e in epsilons {
                            t2s.extend([at - e, at + e]);
                        }
                    }
                }
                for t2 in t2s {
                    let p2 = Pass2Result { t2: us(t2), raw_x2: 500.0, raw_y2: 500.0 };
                    let got = gate1_temporal(us(t1), &p2, (us(w.0), us(w.1)), us(tau));
                    let (want_t, want_src) = gate1_reference(t1, t2, w, tau);
                    cases += 1;
                    ensure(got == (us(want_t), want_src), || {
                        format!("gate1 t2={} w={:?} tau={}: got {got:?}", us(t2), (us(w.0), us(w.1)), us(tau))
                    })?;
                }
            }
        }
        let raw1 = (300.0, 400.0);
        for m in [0.0, 5.0, 10.0, 20.0, 50.0] {
            let hi = 1000.0 - m;
            let values = [-1.0, 0.0, m - 1.0, m - 0.5, m, m + 0.5, 500.0, hi - 0.5, hi, hi + 0.5, hi + 1.0, 1000.0, 1001.0];
            for x in values {
                for y in values {
                    cases += 1;
                    let got = gate2_spatial(raw1, (x, y), m);
                    ensure(got == gate2_reference(raw1, (x, y), m), || format!("gate2 ({x},{y}) m={m}: got {got:?}"))?;
                }
            }
        }
        within_budget(started, Duration::from_secs(1))?;
        Ok(format!("{cases} boundary cases agree"))
    })();
    verdict(result)
}

// 2 -------------------------------------------------------------------------

fn brute_force(pred: &PredictionRow, gt: &GroundTruth, p: &MetricParams) -> (f64, f64, f64, f64) {
    let z = |d: f64, s: f64| (-0.5 * (d / s).powi(2)).exp();
    let t = z(pred.time - gt.time, p.sigma_t);
    let s = z(pred.x - gt.x, p.sigma_x) * z(pred.y - gt.y, p.sigma_y);
    let c = if pred.collision.as_str() == gt.collision.as_str() { 1.0 } else { 0.0 };
    let hm = if t == 0.0 || s == 0.0 || c == 0.0 { 0.0 } else { 3.0 / (1.0 / t + 1.0 / s + 1.0 / c) };
    (t, s, c, hm)
}

fn criterion_evaluator() -> Verdict {
    let result = (|| {
        let params = MetricParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut worst: f64 = 0.0;
        for i in 0..1000 {
            let id = format!("v{i}");
            let gt = GroundTruth {
                video_id: id.clone(),
                time: rng.random_range(0.0..60.0),
                x: rng.random(),
                y: rng.random(),
                collision: CollisionType::ALL[rng.random_range(0..5)],
            };
            let spread = [0.1, 1.0, 10.0][i % 3];
            let pred = PredictionRow {
                video_id: id,
                time: gt.time + rng.random_range(-spread..spread),
                x: (gt.x + rng.random_range(-0.3..0.3)).clamp(0.0, 1.0),
                y: (gt.y + rng.random_range(-0.3..0.3)).clamp(0.0, 1.0),
                collision: if rng.random_bool(0.6) { gt.collision } else { CollisionType::ALL[rng.random_range(0..5)] },
            };
            let got = score_video(&pred, &gt, &params).map_err(|e| e.to_string())?;
            let want = brute_force(&pred, &gt, &params);
            for (a, b) in [(got.t, want.0), (got.s, want.1), (got.c, want.2), (got.hm, want.3)] {
                worst = worst.max((a - b).abs());
            }
        }
        ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;

        let rows = [
            ScoreRow { video_id: "a".into(), t: 1.0, s: 1.0, c: 1.0, hm: harmonic_mean(1.0, 1.0, 1.0) },
            ScoreRow { video_id: "b".into(), t: 0.5, s: 0.5, c: 0.0, hm: harmonic_mean(0.5, 0.5, 0.0) },
        ];
        let s = dataset_summary(&rows).map_err(|e| e.to_string())?;
        ensure((s.mean_t, s.mean_s, s.mean_c, s.acc_s) == (0.75, 0.75, 0.5, 0.5), || format!("{s:?}"))?;
        ensure((s.hm_of_means - 9.0 / 14.0).abs() < 1e-15 && format!("{:.6}", s.hm_of_means) == "0.642857", || {
            format!("hm of means {}", s.hm_of_means)
        })?;
        Ok(format!("1000 pairs, max deviation {worst:e}; two-row example exact"))
    })();
    verdict(result)
}

// 3 -------------------------------------------------------------------------

fn criterion_known_points() -> Verdict {
    let checks = [
        ("temporal(1, 1)", temporal_score(1.0, 0.0, 1.0), 0.606531),
        ("spatial(0.127, 0.119)", spatial_score((0.627, 0.619), (0.5, 0.5), 0.127, 0.119), 0.367879),
        ("hm(0.9, 0.6, 0.3)", harmonic_mean(0.9, 0.6, 0.3), 0.490909),
    ];
    let result = checks.iter().try_for_each(|(name, got, want)| {
        ensure((got - want).abs() <= 1e-6, || format!("{name} = {got}, expected {want}"))
    });
    verdict(result.map(|_| "3 points within 1e-6".to_string()))
}

// 4 -------------------------------------------------------------------------

fn criterion_determinism() -> Verdict {
    let started = Instant::now();
    let result = (|| {
        let fx = fixture_dir(&FixtureSpec::default());
        let root = fx.dir.path();
        let rt = runtime();
        let mut fell_back = BTreeSet::new();
        for name in ["a", "b"] {
            let (out, _server) = rt.block_on(run_with_mock(
                fx.fixture.script.clone(),
                seeded(0.17, 42),
                &fx.videos,
                &root.join(name),
                |_| {},
            ));
            let set: BTreeSet<String> =
                out.predictions.iter().filter(|p| p.used_fallback()).map(|p| p.video_id.clone()).collect();
            if name == "a" {
                fell_back = set;
            } else {
                ensure(set == fell_back, || "fallback sets differ between runs".into())?;
            }
        }
        for f in [PREDICTIONS_FILE, TRACES_FILE] {
            ensure(read(root.join("a").join(f)) == read(root.join("b").join(f)), || format!("{f} differs"))?;
        }
        let forced: BTreeSet<String> = fx
            .videos
            .iter()
            .filter(|v| forced_failure(42, &v.video_id, 0.17))
            .map(|v| v.video_id.clone())
            .collect();
        ensure(fell_back == forced, || format!("fallback {fell_back:?} vs forced {forced:?}"))?;
        within_budget(started, Duration::from_secs(120))?;
        Ok(format!("100 videos, {} forced failures, byte-identical", forced.len()))
    })();
    verdict(result)
}

// 5, 6 ------------------------------------------------------------------------

struct Replay {
    _dir: tempfile::TempDir,
    ground_truth: Vec<GroundTruth>,
    online: accident_grounding::evaluator::Summary,
    traces: Vec<accident_grounding::pipeline::PassTrace>,
}

fn replay_fixture(spec: &FixtureSpec) -> Result<Replay, String> {
    let fx = fixture_dir(spec);
    let out_dir = fx.dir.path().join("run");
    let (out, _server) =
        runtime().block_on(run_with_mock(fx.fixture.script.clone(), seeded(0.17, 42), &fx.videos, &out_dir, |_| {}));
    let metric = MetricParams::default();
    let rows: Vec<PredictionRow> = out.predictions.iter().map(|p| p.to_row()).collect();
    let online = dataset_summary(&score_all(&rows, &fx.fixture.ground_truth, &metric).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let traces = read_traces(&out_dir.join(TRACES_FILE)).map_err(|e| e.to_string())?;
    Ok(Replay {
        ground_truth: fx.fixture.ground_truth.clone(),
        _dir: fx.dir,
        online,
        traces,
    })
}

fn criterion_offline_consistency() -> Verdict {
    let result = (|| {
        let r = replay_fixture(&FixtureSpec::default())?;
        let base = GateParams::from(&RunConfig::default());
        let metric = MetricParams::default();
        let sweep = sweep_gates(&r.traces, &r.ground_truth, &[0.3], &[10.0], &base, &metric).map_err(|e| e.to_string())?;
        for row in sweep.tau.iter().chain(&sweep.margin) {
            ensure(row.summary == r.online, || format!("sweep row {row:?} vs online {:?}", r.online))?;
        }
        let ablation = ablation_report(&r.traces, &r.ground_truth, &base, &metric, 2.0).map_err(|e| e.to_string())?;
        let full = ablation.last().ok_or("empty ablation")?;
        ensure(full.summary == r.online, || format!("ablation {:?} vs online {:?}", full.summary, r.online))?;
        Ok(format!("ACC_S {} reproduced bit for bit", r.online.acc_s))
    })();
    verdict(result)
}

fn criterion_sweep_transition() -> Verdict {
    let result = (|| {
        // No hedges, so every fine time stays more than 0.3 s from the
        // edges. Several invalid points, since forced coarse failures can
        // swallow any single one.
        let r = replay_fixture(&FixtureSpec {
            hedge_rate: 0.0,
            invalid_point_videos: 4,
            ..FixtureSpec::default()
        })?;
        let invalid = r.traces.iter().filter(|t| t.pass2.is_some_and(|p| p.raw_x2 == -1.0 && p.raw_y2 == -1.0)).count();
        ensure(invalid >= 1, || "no (-1, -1) fine point in traces".into())?;
        for t in &r.traces {
            if let (Some(p2), Some(w)) = (t.pass2, t.window) {
                if p2.t2 >= 0.0 {
                    let d = (p2.t2 - w.0).abs().min((p2.t2 - w.1).abs());
                    ensure(d > 0.3, || format!("{}: fine time {} is {d} s from the edge", t.video_id, p2.t2))?;
                }
            }
        }
        let base = GateParams::from(&RunConfig::default());
        let metric = MetricParams::default();
        let sweep = sweep_gates(&r.traces, &r.ground_truth, &[0.1, 0.2, 0.3], &[0.0, 5.0, 10.0, 20.0, 50.0], &base, &metric)
            .map_err(|e| e.to_string())?;
        for row in &sweep.tau[1..] {
            ensure(row.summary == sweep.tau[0].summary, || format!("tau {} differs from tau 0.1", row.tau))?;
        }
        let m0 = &sweep.margin[0];
        for row in &sweep.margin[1..] {
            ensure(m0.summary.mean_s < row.summary.mean_s, || {
                format!("S(m=0)={} not below S(m={})={}", m0.summary.mean_s, row.margin, row.summary.mean_s)
            })?;
        }

        // Expected drop from the fixture itself: only videos whose fine
        // point (or the failure sentinel) lies outside [10, 990] change.
        let gts: std::collections::HashMap<&str, &GroundTruth> =
            r.ground_truth.iter().map(|g| (g.video_id.as_str(), g)).collect();
        let mut delta = 0.0;
        for t in &r.traces {
            let Some(p1) = t.pass1 else { continue };
            let p2 = t.pass2.unwrap_or(Pass2Result::SENTINEL);
            let inside = |v: f64| (10.0..=990.0).contains(&v);
            if inside(p2.raw_x2) && inside(p2.raw_y2) {
                continue;
            }
            let g = gts[t.video_id.as_str()];
            let s = |x: f64, y: f64| spatial_score((x / 1000.0, y / 1000.0), (g.x, g.y), metric.sigma_x, metric.sigma_y);
            delta += s(p2.raw_x2, p2.raw_y2) - s(p1.raw_x1, p1.raw_y1);
        }
        delta /= r.traces.len() as f64;
        let m10 = sweep.margin.iter().find(|row| row.margin == 10.0).ok_or("no m=10 row")?;
        let observed = m0.summary.mean_s - m10.summary.mean_s;
        ensure((observed - delta).abs() < 1e-12, || format!("dS observed {observed}, expected {delta}"))?;
        Ok(format!("{invalid} invalid point(s); dS(m=0)={observed:.4}; tau 0.1-0.3 flat"))
    })();
    verdict(result)
}

// 7 -------------------------------------------------------------------------

fn criterion_bootstrap() -> Verdict {
    let started = Instant::now();
    let result = (|| {
        let flat: Vec<ScoreRow> = (0..50)
            .map(|i| ScoreRow { video_id: format!("v{i:02}"), t: 0.4, s: 0.4, c: 1.0, hm: 0.5 })
            .collect();
        let ci = bootstrap_ci(&flat, 1000, 0.95, 42).map_err(|e| e.to_string())?;
        ensure(ci == (0.5, 0.5), || format!("degenerate CI {ci:?}"))?;

        // Rows from a known mixture: 0 w.p. 0.4, else uniform on [0.5, 1].
        let true_mean = 0.6 * 0.75;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let trials = 200;
        let mut covered = 0;
        for trial in 0..trials {
            let values: Vec<f64> = (0..500)
                .map(|_| if rng.random_bool(0.4) { 0.0 } else { rng.random_range(0.5..=1.0) })
                .collect();
            let (lo, hi) = percentile_interval(&values, 1000, 0.95, trial);
            if lo <= true_mean && true_mean <= hi {
                covered += 1;
            }
        }
        let rate = covered as f64 / trials as f64;
        ensure((0.92..=0.98).contains(&rate), || format!("coverage {rate}"))?;

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<ScoreRow> = (0..300)
            .map(|i| {
                let (t, s, c) = (rng.random(), rng.random(), if rng.random_bool(0.5) { 1.0 } else { 0.0 });
                ScoreRow { video_id: format!("v{i:03}"), t, s, c, hm: harmonic_mean(t, s, c) }
            })
            .collect();
        let paired = paired_bootstrap(&rows, &rows, 1000, 42).map_err(|e| e.to_string())?;
        ensure(paired.delta_mean == 0.0 && paired.p_two_sided >= 0.99, || format!("{paired:?}"))?;
        within_budget(started, Duration::from_secs(30))?;
        Ok(format!("coverage {:.1}% over {trials} trials", rate * 100.0))
    })();
    verdict(result)
}

// 8 -------------------------------------------------------------------------

fn criterion_oracle() -> Verdict {
    let result = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (mut equal, mut strict) = (0, 0);
        for k in 0..1000 {
            let n = rng.random_range(1..=50);
            // Millisecond errors, so per-video differences never vanish in
            // floating point.
            let draw = |rng: &mut ChaCha8Rng| rng.random_range(0..20_000) as f64 / 1000.0;
            let a: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
            let b: Vec<f64> = match k % 3 {
                0 => a.iter().map(|x| x + rng.random_range(0..3000) as f64 / 1000.0).collect(),
                1 => (0..n).map(|_| draw(&mut rng)).collect(),
                _ => a.iter().map(|x| (x - rng.random_range(0..3000) as f64 / 1000.0).max(0.0)).collect(),
            };
            let series = |v: &[f64]| v.iter().enumerate().map(|(i, e)| (format!("v{i:02}"), *e)).collect::<Vec<_>>();
            let o = oracle_mae(&series(&a), &series(&b)).map_err(|e| e.to_string())?;
            let min = o.mae_a.min(o.mae_b);
            ensure(o.mae_oracle <= min, || format!("pair {k}: oracle {} > min {min}", o.mae_oracle))?;
            let dominated = a.iter().zip(&b).all(|(x, y)| x <= y) || a.iter().zip(&b).all(|(x, y)| y <= x);
            ensure((o.mae_oracle == min) == dominated, || {
                format!("pair {k}: equality {} but dominance {dominated}", o.mae_oracle == min)
            })?;
            if dominated {
                equal += 1;
            } else {
                strict += 1;
            }
        }
        Ok(format!("1000 pairs ({equal} dominated, {strict} strict)"))
    })();
    verdict(result)
}

// 9 -------------------------------------------------------------------------

fn criterion_prompts() -> Verdict {
    let golden_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let combos = [("short_clip", 7.0, (0.0, 6.0)), ("mid_clip", 26.8, (23.0, 26.8)), ("long_clip", 45.0, (9.0, 15.0))];
    let result = (|| {
        for (name, duration, window) in combos {
            let v = VideoRecord { video_id: "g".into(), path: PathBuf::from("g.mp4"), duration, width: 1280, height: 720 };
            for (kind, suffix) in [(PassKind::Coarse, "coarse"), (PassKind::Fine, "fine"), (PassKind::Type, "type")] {
                let path = golden_dir.join(format!("{name}_{suffix}.txt"));
                let want = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                let got = render_prompt(&PromptTemplate::for_kind(kind), &v, Some(window)).map_err(|e| e.to_string())?;
                ensure(got.as_bytes() == want.as_slice(), || format!("{name}_{suffix} differs"))?;
            }
        }
        Ok("9 golden files byte-identical".to_string())
    })();
    verdict(result)
}

// 10 ------------------------------------------------------------------------

/// (type, N, T, S, C, ACC_S) of the released full-pipeline predictions.
const PER_TYPE: [(&str, usize, f64, f64, f64, f64); 5] = [
    ("head-on", 117, 0.633, 0.637, 0.043, 0.113),
    ("rear-end", 328, 0.451, 0.553, 0.582, 0.522),
    ("sideswipe", 245, 0.442, 0.454, 0.057, 0.137),
    ("t-bone", 657, 0.661, 0.623, 0.836, 0.695),
    ("single", 680, 0.359, 0.462, 0.644, 0.461),
];
const POOLED_ACC_S: f64 = 0.539;

fn replication_file(var: &str, default: &str) -> PathBuf {
    std::env::var_os(var).map(PathBuf::from).unwrap_or_else(|| {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/replication").join(default)
    })
}

fn criterion_replication() -> Verdict {
    let pred = replication_file("ACCEPTANCE_REPLICATION_PRED", "predictions.csv");
    let gt = replication_file("ACCEPTANCE_REPLICATION_GT", "ground_truth.csv");
    if !pred.exists() || !gt.exists() {
        return Verdict::Skip(format!("released CSVs not found ({} / {})", pred.display(), gt.display()));
    }
    let result = (|| {
        let out = tempfile::tempdir().map_err(|e| e.to_string())?;
        let o = std::process::Command::new(env!("CARGO_BIN_EXE_accident-grounding"))
            .args(["score", "--pred"])
            .arg(&pred)
            .arg("--gt")
            .arg(&gt)
            .arg("--out-dir")
            .arg(out.path())
            .env("RUST_LOG", "warn")
            .output()
            .map_err(|e| e.to_string())?;
        ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).trim().to_string())?;
        let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(out.path().join("summary.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let acc = doc["summary"]["acc_s"].as_f64().ok_or("no acc_s")?;
        ensure((acc - POOLED_ACC_S).abs() <= 0.001, || format!("ACC_S {acc}"))?;
        let rows = doc["per_type"]["rows"].as_array().ok_or("no per-type rows")?;
        for (name, n, t, s, c, a) in PER_TYPE {
            let row = rows
                .iter()
                .find(|r| r["collision"].as_str().and_then(|k| accident_grounding::parser::normalize_type(k).ok()).map(|k| k.as_str()) == Some(name))
                .ok_or_else(|| format!("no row for {name}"))?;
            let sm = &row["summary"];
            ensure(sm["n"].as_u64() == Some(n as u64), || format!("{name}: N {}", sm["n"]))?;
            for (field, want) in [("mean_t", t), ("mean_s", s), ("mean_c", c), ("acc_s", a)] {
                let got = sm[field].as_f64().unwrap_or(f64::NAN);
                ensure((got - want).abs() <= 0.002, || format!("{name} {field}: {got} vs {want}"))?;
            }
        }
        Ok(format!("ACC_S {acc:.4}, per-type table within 0.002"))
    })();
    verdict(result)
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("gate truth tables", criterion_gates),
        ("evaluator oracle equivalence", criterion_evaluator),
        ("known-answer metric points", criterion_known_points),
        ("end-to-end determinism", criterion_determinism),
        ("trace/offline consistency", criterion_offline_consistency),
        ("sweep transition at m=0, flat tau", criterion_sweep_transition),
        ("bootstrap behaviour", criterion_bootstrap),
        ("oracle property", criterion_oracle),
        ("prompt fidelity", criterion_prompts),
        ("replication hook", criterion_replication),
    ];
    // A panicking criterion reports as a failure, not as noise.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let v = std::panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Verdict::Fail(format!("panicked: {msg}"))
        });
        let took = started.elapsed().as_secs_f64();
        let (tag, detail) = match v {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] criterion {:>2}: {name} ({took:.2}s) - {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
