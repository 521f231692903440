//! Freezing an endpoint's answers into a replayable script. Here the
//! "real" endpoint is another mock; point `--record-upstream` of
//! `mock-serve` at a provider to do the same against live models.
//!
//!     cargo run --example record_replay

use accident_grounding::gateway::{call_with_retry, ContentPart, MultimodalMessage, ProviderProfile, ProviderRole};
use accident_grounding::mock_vlm::{MockOptions, MockServer, Script, ScriptEntry};
use accident_grounding::config::RunConfig;
use accident_grounding::sampler::PassKind;
use serde_json::json;

fn profile(url: &str) -> anyhow::Result<ProviderProfile> {
    let cfg = RunConfig::resolve([json!({"grounding": {"endpoint": url}, "typing": {"endpoint": url}})])?;
    let mut p = ProviderProfile::from_config(ProviderRole::Grounding, &cfg)?;
    p.require_credentials = false;
    Ok(p)
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let upstream = MockServer::start_local(
        Script::from_entries([ScriptEntry::ok("clip", PassKind::Coarse, r#"{"time": 4, "x": 210, "y": 655, "type": "t-bone"}"#)])?,
        MockOptions::default(),
    )
    .await?;
    let proxy = MockServer::start_local(
        Script::default(),
        MockOptions { record_upstream: Some(upstream.url()), ..MockOptions::default() },
    )
    .await?;

    let message = MultimodalMessage {
        kind: PassKind::Coarse,
        parts: vec![ContentPart::Text("[Frame at 0s]".into()), ContentPart::Text("where is the crash?".into())],
    };
    let client = reqwest::Client::new();
    let live = call_with_retry(&client, &profile(&proxy.url())?, "clip", &message).await?;
    println!("through the recording proxy: {}", live.raw_text);

    let script = proxy.recorded_script().expect("proxy records");
    let mut jsonl = Vec::new();
    script.write(&mut jsonl)?;
    print!("recorded script:\n{}", String::from_utf8(jsonl)?);

    upstream.shutdown().await;
    let replay = MockServer::start_local(script, MockOptions::default()).await?;
    let again = call_with_retry(&client, &profile(&replay.url())?, "clip", &message).await?;
    println!("replayed with the upstream gone: {}", again.raw_text);
    Ok(())
}
