mod common;

use accident_grounding::gates::Source;
use accident_grounding::gateway::CallStatus;
use accident_grounding::mock_vlm::{Behavior, MockOptions, Script, ScriptEntry};
use accident_grounding::parser::CollisionType;
use accident_grounding::pipeline::{FallbackSource, TypeSource};
use accident_grounding::sampler::PassKind;
use common::{frames_video, run_with_mock};

fn script(entries: Vec<ScriptEntry>) -> Script {
    Script::from_entries(entries).unwrap()
}

#[tokio::test]
async fn fine_answer_wins_when_confident_and_in_grid() {
    let dir = tempfile::tempdir().unwrap();
    let v = frames_video(dir.path(), "clip", 20.0);
    let s = script(vec![
        ScriptEntry::ok("clip", PassKind::Coarse, r#"{"time": 10, "x": 640, "y": 380, "type": "single"}"#),
        ScriptEntry::ok("clip", PassKind::Fine, r#"{"time": 11.4, "x": 512, "y": 488}"#),
        ScriptEntry::ok("clip", PassKind::Type, "single"),
    ]);
    let (out, server) = run_with_mock(s, MockOptions::default(), &[v], &dir.path().join("out"), |_| {}).await;
    let p = &out.predictions[0];
    assert_eq!((p.t_star, p.x_star, p.y_star, p.c_star), (11.4, 0.512, 0.488, CollisionType::Single));
    assert_eq!(p.provenance.time_source, Some(Source::Pass2));
    assert_eq!(p.provenance.space_source, Some(Source::Pass2));
    assert_eq!(p.provenance.type_source, TypeSource::Specialist);
    for kind in [PassKind::Coarse, PassKind::Fine, PassKind::Type] {
        assert_eq!(server.attempts("clip", kind), 1, "{kind:?}");
    }
}

#[tokio::test]
async fn failed_fine_call_is_absorbed_by_both_gates() {
    let dir = tempfile::tempdir().unwrap();
    let v = frames_video(dir.path(), "clip", 20.0);
    let s = script(vec![
        ScriptEntry::ok("clip", PassKind::Coarse, r#"{"time": 10, "x": 640, "y": 380, "type": "rear-end"}"#),
        ScriptEntry::failing("clip", PassKind::Fine, Behavior::Http500),
        ScriptEntry::ok("clip", PassKind::Type, "t_bone"),
    ]);
    let (out, server) = run_with_mock(s, MockOptions::default(), &[v], &dir.path().join("out"), |_| {}).await;
    let p = &out.predictions[0];
    assert_eq!((p.t_star, p.x_star, p.y_star), (10.0, 0.640, 0.380));
    assert_eq!(p.c_star, CollisionType::TBone);
    assert_eq!(p.provenance.time_source, Some(Source::Pass1));
    assert_eq!(p.provenance.space_source, Some(Source::Pass1));
    assert!(!p.provenance.pass2_ok);

    let trace = &out.traces["clip"];
    let fine = trace.call(PassKind::Fine).unwrap();
    assert_eq!(fine.status, CallStatus::Failed);
    assert_eq!(fine.attempts, 4);
    assert_eq!(server.attempts("clip", PassKind::Fine), 4);
    assert_eq!(out.report.pass2.failed, 1);
}

#[tokio::test]
async fn failed_coarse_call_falls_back_to_naive_fill() {
    let dir = tempfile::tempdir().unwrap();
    let v = frames_video(dir.path(), "clip", 20.0);
    let s = script(vec![ScriptEntry::failing("clip", PassKind::Coarse, Behavior::Http500)]);
    let (out, server) = run_with_mock(s, MockOptions::default(), &[v], &dir.path().join("out"), |_| {}).await;
    let p = &out.predictions[0];
    assert_eq!((p.t_star, p.x_star, p.y_star, p.c_star), (10.0, 0.5, 0.5, CollisionType::Single));
    assert_eq!(p.provenance.type_source, TypeSource::Fallback);
    assert!(p.used_fallback());
    assert_eq!(out.traces["clip"].fallback.as_ref().unwrap().source, FallbackSource::NaiveFill);
    // No refinement or typing after a coarse failure.
    assert_eq!(server.attempts("clip", PassKind::Fine), 0);
    assert_eq!(server.attempts("clip", PassKind::Type), 0);
    assert_eq!(out.report.fallback_used, 1);
}

#[tokio::test]
async fn unparseable_coarse_answer_counts_as_failure() {
    let dir = tempfile::tempdir().unwrap();
    let v = frames_video(dir.path(), "clip", 12.0);
    let s = script(vec![ScriptEntry::ok("clip", PassKind::Coarse, "I cannot see any accident here.")]);
    let (out, _server) = run_with_mock(s, MockOptions::default(), &[v], &dir.path().join("out"), |_| {}).await;
    let p = &out.predictions[0];
    assert_eq!((p.t_star, p.x_star, p.y_star), (6.0, 0.5, 0.5));
    let coarse = out.traces["clip"].call(PassKind::Coarse).unwrap();
    assert_eq!(coarse.status, CallStatus::Ok);
    assert!(coarse.parse_error.is_some());
    assert_eq!(out.report.pass1.parse_failed, 1);
}

#[tokio::test]
async fn edge_hedge_and_out_of_grid_point_keep_coarse_values() {
    let dir = tempfile::tempdir().unwrap();
    let v = frames_video(dir.path(), "clip", 20.0);
    // Window is [7, 13]; 12.8 is within 0.3 s of its end.
    let s = script(vec![
        ScriptEntry::ok("clip", PassKind::Coarse, r#"{"time": 10, "x": 640, "y": 380, "type": "head-on"}"#),
        ScriptEntry::ok("clip", PassKind::Fine, r#"{"time": 12.8, "x": 995, "y": 488}"#),
        ScriptEntry::ok("clip", PassKind::Type, "no idea"),
    ]);
    let (out, _server) = run_with_mock(s, MockOptions::default(), &[v], &dir.path().join("out"), |_| {}).await;
    let p = &out.predictions[0];
    assert_eq!((p.t_star, p.x_star, p.y_star), (10.0, 0.640, 0.380));
    // Typing answer did not parse: the coarse type stays.
    assert_eq!(p.c_star, CollisionType::HeadOn);
    assert_eq!(p.provenance.type_source, TypeSource::Pass1Backup);
}

#[tokio::test]
async fn specialist_can_be_switched_off() {
    let dir = tempfile::tempdir().unwrap();
    let v = frames_video(dir.path(), "clip", 20.0);
    let s = script(vec![
        ScriptEntry::ok("clip", PassKind::Coarse, r#"{"time": 10, "x": 640, "y": 380, "type": "sideswipe"}"#),
        ScriptEntry::ok("clip", PassKind::Fine, r#"{"time": 11.4, "x": 512, "y": 488}"#),
    ]);
    let (out, server) = run_with_mock(s, MockOptions::default(), &[v], &dir.path().join("out"), |c| {
        c.use_specialist_type = false;
    })
    .await;
    assert_eq!(out.predictions[0].c_star, CollisionType::Sideswipe);
    assert_eq!(server.attempts("clip", PassKind::Type), 0);
}
