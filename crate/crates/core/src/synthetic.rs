//! Seeded synthetic corpora for demos and end-to-end tests: a manifest,
//! ground truth, a mock script whose answers are noisy versions of the
//! ground truth, and a tiny shared frame directory.
//!
//! The script deliberately contains the cases the gates exist for: fine
//! answers hedged exactly onto a window edge, `-1` abstentions, an invalid
//! `(-1, -1)` fine point, failed fine calls, retried calls and unparseable
//! typing answers. Good fine answers keep more than one second away from
//! the window edges and inside `[60, 940]` on the grid, so threshold sweeps
//! react only to those planted cases.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::evaluator::{write_predictions, GroundTruth, PredictionRow};
use crate::mock_vlm::{Behavior, Script, ScriptEntry, ScriptStep};
use crate::parser::CollisionType;
use crate::sampler::{refinement_window, PassKind};
use crate::video::{write_manifest, VideoRecord};

#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub n_videos: usize,
    pub seed: u64,
    /// Stored as each video's `path`; relative paths resolve against the
    /// manifest directory.
    pub frames_dir: PathBuf,
    pub min_duration: f64,
    pub max_duration: f64,
    pub window_delta: f64,
    pub hedge_rate: f64,
    pub abstain_rate: f64,
    pub fine_failure_rate: f64,
    pub retry_rate: f64,
    pub typing_garbage_rate: f64,
    /// Videos whose fine answer is the invalid point `(-1, -1)`.
    pub invalid_point_videos: usize,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            n_videos: 100,
            seed: 42,
            frames_dir: PathBuf::from("frames"),
            min_duration: 8.0,
            max_duration: 40.0,
            window_delta: 3.0,
            hedge_rate: 0.10,
            abstain_rate: 0.08,
            fine_failure_rate: 0.03,
            retry_rate: 0.05,
            typing_garbage_rate: 0.05,
            invalid_point_videos: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub videos: Vec<VideoRecord>,
    pub ground_truth: Vec<GroundTruth>,
    pub script: Script,
}

/// Class frequencies loosely shaped like real crash data: single-vehicle
/// and rear-end dominate.
const TYPE_WEIGHTS: [(CollisionType, f64); 5] = [
    (CollisionType::Single, 0.35),
    (CollisionType::RearEnd, 0.25),
    (CollisionType::TBone, 0.18),
    (CollisionType::Sideswipe, 0.14),
    (CollisionType::HeadOn, 0.08),
];

fn pick_type(rng: &mut ChaCha8Rng) -> CollisionType {
    let mut u: f64 = rng.random();
    for (c, w) in TYPE_WEIGHTS {
        if u < w {
            return c;
        }
        u -= w;
    }
    CollisionType::Single
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

/// Roughly bell-shaped noise in `[-scale, scale]`.
fn noise(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    let s: f64 = (0..3).map(|_| rng.random_range(-1.0..1.0)).sum();
    s / 3.0 * scale
}

pub fn generate(spec: &FixtureSpec) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut videos = Vec::with_capacity(spec.n_videos);
    let mut ground_truth = Vec::with_capacity(spec.n_videos);
    let mut entries = Vec::new();
    let invalid_every = spec
        .n_videos
        .checked_div(spec.invalid_point_videos)
        .map_or(usize::MAX, |k| k.max(1));

    for i in 0..spec.n_videos {
        let video_id = format!("vid{:04}", i + 1);
        let duration = round1(rng.random_range(spec.min_duration..spec.max_duration));
        let t_gt = round1(rng.random_range(1.0..duration - 1.0));
        let (x_gt, y_gt) = (rng.random_range(0.15..0.85), rng.random_range(0.15..0.85));
        let c_gt = pick_type(&mut rng);
        videos.push(VideoRecord {
            video_id: video_id.clone(),
            path: spec.frames_dir.clone(),
            duration,
            width: 1280,
            height: 720,
        });
        ground_truth.push(GroundTruth {
            video_id: video_id.clone(),
            time: t_gt,
            x: x_gt,
            y: y_gt,
            collision: c_gt,
        });

        // Coarse: whole seconds, a few seconds of error, a rough point.
        let t1 = (t_gt + noise(&mut rng, 2.5)).round().clamp(0.0, duration.floor());
        let x1 = ((x_gt + noise(&mut rng, 0.12)) * 1000.0).round().clamp(0.0, 1000.0);
        let y1 = ((y_gt + noise(&mut rng, 0.12)) * 1000.0).round().clamp(0.0, 1000.0);
        let c1 = if rng.random_bool(0.55) { c_gt } else { pick_type(&mut rng) };
        entries.push(ScriptEntry::ok(
            &video_id,
            PassKind::Coarse,
            format!("{{\"time\": {t1}, \"x\": {x1}, \"y\": {y1}, \"type\": \"{}\"}}", c1.as_str()),
        ));

        // Fine: mostly a sharper answer, sometimes a planted failure mode.
        let (w_min, w_max) = refinement_window(t1, duration, spec.window_delta);
        let x2 = ((x_gt + noise(&mut rng, 0.04)) * 1000.0).round().clamp(60.0, 940.0);
        let y2 = ((y_gt + noise(&mut rng, 0.04)) * 1000.0).round().clamp(60.0, 940.0);
        let good_t2 = round1((t_gt + noise(&mut rng, 0.4)).clamp(w_min + 1.1, (w_max - 1.1).max(w_min + 1.1)));
        let u: f64 = rng.random();
        let fine_body = |t: f64, x: f64, y: f64| format!("{{\"time\": {t}, \"x\": {x}, \"y\": {y}}}");
        let fine = if i % invalid_every == invalid_every / 2 {
            ScriptEntry::ok(&video_id, PassKind::Fine, fine_body(good_t2, -1.0, -1.0))
        } else if u < spec.hedge_rate {
            let edge = if rng.random_bool(0.5) { w_min } else { w_max };
            ScriptEntry::ok(&video_id, PassKind::Fine, fine_body(edge, x2, y2))
        } else if u < spec.hedge_rate + spec.abstain_rate {
            ScriptEntry::ok(&video_id, PassKind::Fine, fine_body(-1.0, x2, y2))
        } else if u < spec.hedge_rate + spec.abstain_rate + spec.fine_failure_rate {
            ScriptEntry::failing(&video_id, PassKind::Fine, Behavior::Http500)
        } else if u < spec.hedge_rate + spec.abstain_rate + spec.fine_failure_rate + spec.retry_rate {
            let fail = ScriptStep { behavior: Behavior::Http500, body: None };
            let ok = ScriptStep { behavior: Behavior::Ok, body: Some(fine_body(good_t2, x2, y2)) };
            ScriptEntry::sequence(&video_id, PassKind::Fine, vec![fail.clone(), fail, ok])
        } else {
            ScriptEntry::ok(&video_id, PassKind::Fine, fine_body(good_t2, x2, y2))
        };
        entries.push(fine);

        // Specialist typing: better than the coarse type, occasionally prose.
        let typing = if rng.random_bool(spec.typing_garbage_rate) {
            "I am unable to determine the collision type from this clip.".to_string()
        } else {
            let c = if rng.random_bool(0.75) { c_gt } else { pick_type(&mut rng) };
            c.as_str().replace('-', "_")
        };
        entries.push(ScriptEntry::ok(&video_id, PassKind::Type, typing));
    }

    Fixture {
        videos,
        ground_truth,
        script: Script::from_entries(entries).expect("generated keys are unique"),
    }
}

#[derive(Debug, Clone)]
pub struct FixturePaths {
    pub manifest: PathBuf,
    pub ground_truth: PathBuf,
    pub script: PathBuf,
    pub frames_dir: PathBuf,
}

/// A few flat-colored frames at 0 s, 10 s and 20 s.
pub fn write_frames(dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (k, t) in [0, 10, 20].into_iter().enumerate() {
        let img = image::RgbImage::from_fn(160, 90, |x, y| {
            image::Rgb([(x as u8).wrapping_mul(3), (y as u8).wrapping_mul(5), 60 * k as u8])
        });
        img.save(dir.join(format!("{t}.png")))
            .map_err(std::io::Error::other)?;
    }
    Ok(())
}

/// Writes `manifest.csv`, `ground_truth.csv`, `script.jsonl` and the frame
/// directory under `dir`.
pub fn write_fixture(fixture: &Fixture, dir: &Path) -> std::io::Result<FixturePaths> {
    std::fs::create_dir_all(dir)?;
    let paths = FixturePaths {
        manifest: dir.join("manifest.csv"),
        ground_truth: dir.join("ground_truth.csv"),
        script: dir.join("script.jsonl"),
        frames_dir: dir.join("frames"),
    };
    write_frames(&paths.frames_dir)?;
    let mut videos = fixture.videos.clone();
    for v in &mut videos {
        v.path = PathBuf::from("frames");
    }
    write_manifest(&paths.manifest, &videos).map_err(std::io::Error::other)?;
    let rows: Vec<PredictionRow> = fixture
        .ground_truth
        .iter()
        .map(|g| PredictionRow {
            video_id: g.video_id.clone(),
            time: g.time,
            x: g.x,
            y: g.y,
            collision: g.collision,
        })
        .collect();
    write_predictions(std::fs::File::create(&paths.ground_truth)?, &rows).map_err(std::io::Error::other)?;
    fixture.script.write(std::fs::File::create(&paths.script)?)?;
    Ok(paths)
}
