//! Scoring predictions, a percentile bootstrap interval, a per-type table
//! and a paired comparison of two systems.
//!
//!     cargo run --example scoring

use accident_grounding::diagnostics::per_type_table;
use accident_grounding::evaluator::{
    bootstrap_ci, dataset_summary, paired_bootstrap, score_all, GroundTruth, MetricParams, PredictionRow,
};
use accident_grounding::parser::CollisionType;
use accident_grounding::synthetic::{generate, FixtureSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A system with time errors up to `dt` seconds, point errors up to `dxy`
/// and the wrong type on a fraction `miss` of clips.
fn noisy(gts: &[GroundTruth], dt: f64, dxy: f64, miss: f64, seed: u64) -> Vec<PredictionRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gts.iter()
        .map(|g| PredictionRow {
            video_id: g.video_id.clone(),
            time: (g.time + rng.random_range(-dt..dt)).max(0.0),
            x: (g.x + rng.random_range(-dxy..dxy)).clamp(0.0, 1.0),
            y: (g.y + rng.random_range(-dxy..dxy)).clamp(0.0, 1.0),
            collision: if rng.random_bool(miss) { CollisionType::Single } else { g.collision },
        })
        .collect()
}

fn main() {
    let gts = generate(&FixtureSpec::default()).ground_truth;
    let params = MetricParams::default();

    let a = score_all(&noisy(&gts, 1.5, 0.10, 0.3, 1), &gts, &params).unwrap();
    let b = score_all(&noisy(&gts, 3.0, 0.15, 0.4, 2), &gts, &params).unwrap();
    for (name, rows) in [("A", &a), ("B", &b)] {
        let s = dataset_summary(rows).unwrap();
        let (lo, hi) = bootstrap_ci(rows, 1000, 0.95, 42).unwrap();
        println!(
            "system {name}: T={:.3} S={:.3} C={:.3} ACC_S={:.3} 95% CI [{lo:.3}, {hi:.3}]",
            s.mean_t, s.mean_s, s.mean_c, s.acc_s
        );
    }
    let p = paired_bootstrap(&a, &b, 1000, 42).unwrap();
    println!("A - B: {:+.3} (p = {:.4})\n", p.delta_mean, p.p_two_sided);
    println!("{}", per_type_table(&a, &gts).unwrap().table().to_text());
}
