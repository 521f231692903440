//! Frame plans for the three calls of one clip and the prompts sent with
//! them.
//!
//!     cargo run --example sampling_and_prompts

use std::path::PathBuf;

use accident_grounding::config::RunConfig;
use accident_grounding::gateway::{render_prompt, PromptTemplate};
use accident_grounding::sampler::{build_pass1_plan, build_pass2_plan, build_type_clip_plan, PassKind, SamplingPlan};
use accident_grounding::video::VideoRecord;

fn show(name: &str, plan: &SamplingPlan) {
    let tags = plan.frame_tags();
    println!(
        "{name}: {} frames, long edge {} px, window {:?}, crop {:?}",
        tags.len(),
        plan.long_edge_px,
        plan.window,
        plan.crop
    );
    println!("  first tags: {:?} ... last: {:?}", &tags[..tags.len().min(3)], tags.last().unwrap());
}

fn main() {
    let cfg = RunConfig::default();
    let video = VideoRecord {
        video_id: "demo".into(),
        path: PathBuf::from("demo.mp4"),
        duration: 26.8,
        width: 1920,
        height: 1080,
    };
    let coarse = build_pass1_plan(&video).unwrap();
    show("coarse", &coarse);
    let fine = build_pass2_plan(&video, 25.0, &cfg).unwrap();
    show("fine  ", &fine);
    let clip = build_type_clip_plan(&video, 24.6, (0.64, 0.38), &cfg).unwrap();
    show("typing", &clip);

    let prompt = render_prompt(&PromptTemplate::for_kind(PassKind::Fine), &video, Some(fine.window)).unwrap();
    println!("\nfine prompt:\n{prompt}");
}
