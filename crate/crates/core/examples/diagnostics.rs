//! Failure diagnostics on a set of predictions: timing bias, error by clip
//! length, the type confusion matrix and a best-of-two oracle.
//!
//!     cargo run --example diagnostics

use std::collections::BTreeMap;

use accident_grounding::diagnostics::{
    confusion_matrix, duration_table, mae_by_duration, oracle_mae, signed_error_stats, time_errors,
    DEFAULT_DURATION_EDGES,
};
use accident_grounding::evaluator::PredictionRow;
use accident_grounding::parser::CollisionType;
use accident_grounding::synthetic::{generate, FixtureSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let fixture = generate(&FixtureSpec::default());
    let gts = &fixture.ground_truth;
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    // A predictor that fires late on long clips and confuses sideswipes.
    let late: Vec<PredictionRow> = gts
        .iter()
        .zip(&fixture.videos)
        .map(|(g, v)| PredictionRow {
            video_id: g.video_id.clone(),
            time: (g.time + v.duration / 20.0 + rng.random_range(-1.0..1.0)).max(0.0),
            x: g.x,
            y: g.y,
            collision: match g.collision {
                CollisionType::Sideswipe if rng.random_bool(0.4) => CollisionType::RearEnd,
                c => c,
            },
        })
        .collect();
    // A second, noisier but unbiased time predictor.
    let noisy: Vec<PredictionRow> = gts
        .iter()
        .map(|g| PredictionRow {
            video_id: g.video_id.clone(),
            time: (g.time + rng.random_range(-4.0..4.0)).max(0.0),
            x: g.x,
            y: g.y,
            collision: g.collision,
        })
        .collect();

    println!("{}", signed_error_stats(&late, gts).unwrap().table().to_text());
    let durations: BTreeMap<String, f64> = fixture.videos.iter().map(|v| (v.video_id.clone(), v.duration)).collect();
    let buckets = mae_by_duration(&late, gts, &durations, &DEFAULT_DURATION_EDGES).unwrap();
    println!("{}", duration_table(&buckets).to_text());
    println!("{}", confusion_matrix(&late, gts).unwrap().table().to_text());

    let o = oracle_mae(&time_errors(&noisy, gts).unwrap(), &time_errors(&late, gts).unwrap()).unwrap();
    println!("oracle: noisy {:.2} s, late {:.2} s, best-of-two {:.2} s", o.mae_a, o.mae_b, o.mae_oracle);
}
