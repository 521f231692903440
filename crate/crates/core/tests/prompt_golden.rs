//! Rendered prompts against hand-checked golden files.

use std::path::PathBuf;

use accident_grounding::gateway::{render_prompt, PromptTemplate};
use accident_grounding::sampler::PassKind;
use accident_grounding::video::VideoRecord;

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn video(duration: f64) -> VideoRecord {
    VideoRecord {
        video_id: "g".into(),
        path: PathBuf::from("g.mp4"),
        duration,
        width: 1280,
        height: 720,
    }
}

/// (file prefix, duration, refinement window)
const COMBOS: [(&str, f64, (f64, f64)); 3] = [
    ("short_clip", 7.0, (0.0, 6.0)),
    ("mid_clip", 26.8, (23.0, 26.8)),
    ("long_clip", 45.0, (9.0, 15.0)),
];

#[test]
fn prompts_match_golden_files() {
    for (name, duration, window) in COMBOS {
        let v = video(duration);
        for (kind, suffix) in [(PassKind::Coarse, "coarse"), (PassKind::Fine, "fine"), (PassKind::Type, "type")] {
            let rendered = render_prompt(&PromptTemplate::for_kind(kind), &v, Some(window)).unwrap();
            assert_eq!(rendered, golden(&format!("{name}_{suffix}.txt")), "{name} {suffix}");
        }
    }
}

#[test]
fn fine_prompt_needs_a_window() {
    assert!(render_prompt(&PromptTemplate::for_kind(PassKind::Fine), &video(10.0), None).is_err());
}
