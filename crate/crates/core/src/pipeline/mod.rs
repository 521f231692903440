//! Per-video grounding: coarse pass, refinement window, fine pass, gates,
//! specialist typing, and the fallback for videos the coarse pass cannot
//! answer.
//!
//! The final answer is always computed by [`decide`] from the parsed pass
//! results. Offline sweeps call the same function on stored traces
//! ([`regate`]), so a replay under the run's own thresholds reproduces the
//! online predictions bit for bit.

mod batch;
mod fallback;
mod trace;

pub use batch::{
    run_batch, BatchError, BatchOutput, RunReport, StageStats, CONFIG_FILE, PREDICTIONS_FILE, REPORT_FILE, TRACES_FILE,
};
pub use fallback::{
    naive_fill, parse_fallback_row, CommandFallback, FallbackError, FallbackGuess, FallbackPredictor, NaiveFill,
    ScriptedFallback,
};
pub use trace::{load_resumable, read_traces, write_canonical, CallRecord, PassTrace, TraceError, TraceSink};

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::config::{ConfigError, FallbackMode, RunConfig, Workers};
use crate::evaluator::PredictionRow;
use crate::gates::{gate1_temporal, gate2_spatial, Source};
use crate::gateway::{
    build_message, render_prompt, CallStatus, Gateway, PromptTemplate, ProviderProfile, ProviderRole,
};
use crate::parser::{parse_pass1, parse_pass2, parse_type_answer, CollisionType, Pass1Result, Pass2Result};
use crate::sampler::{
    build_pass1_plan, build_pass2_plan, build_type_clip_plan, refinement_window, FrameExtractor, PassKind,
    AutoExtractor, SamplerError, SamplingPlan,
};
use crate::video::VideoRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeSource {
    Specialist,
    Pass1Backup,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackSource {
    Plugin,
    NaiveFill,
}

/// What the fallback produced for a video whose coarse pass failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FallbackRecord {
    pub source: FallbackSource,
    pub guess: FallbackGuess,
    /// Plugin failure that forced the naive fill, if any.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub pass1_ok: bool,
    pub pass2_ok: bool,
    pub typing_ok: bool,
    /// `None` when the fallback supplied the answer.
    pub time_source: Option<Source>,
    pub space_source: Option<Source>,
    pub type_source: TypeSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub video_id: String,
    pub t_star: f64,
    pub x_star: f64,
    pub y_star: f64,
    pub c_star: CollisionType,
    pub provenance: Provenance,
}

impl Prediction {
    pub fn to_row(&self) -> PredictionRow {
        PredictionRow {
            video_id: self.video_id.clone(),
            time: self.t_star,
            x: self.x_star,
            y: self.y_star,
            collision: self.c_star,
        }
    }

    pub fn used_fallback(&self) -> bool {
        self.provenance.type_source == TypeSource::Fallback
    }
}

/// Everything [`decide`] needs besides the pass results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub window_delta: f64,
    pub tau: f64,
    pub margin: f64,
    pub use_pass2_time: bool,
    pub use_pass2_space: bool,
    pub use_specialist_type: bool,
}

impl From<&RunConfig> for GateParams {
    fn from(cfg: &RunConfig) -> Self {
        GateParams {
            window_delta: cfg.window_delta,
            tau: cfg.tau,
            margin: cfg.margin,
            use_pass2_time: cfg.use_pass2_time,
            use_pass2_space: cfg.use_pass2_space,
            use_specialist_type: cfg.use_specialist_type,
        }
    }
}

impl Default for GateParams {
    fn default() -> Self {
        GateParams::from(&RunConfig::default())
    }
}

/// Parsed results for one video, as stored in its trace.
#[derive(Debug, Clone, Copy)]
pub struct PassResults<'a> {
    pub duration: f64,
    pub pass1: Option<&'a Pass1Result>,
    /// `None` means the fine pass failed; it is read as the sentinel.
    pub pass2: Option<&'a Pass2Result>,
    pub specialist: Option<CollisionType>,
    pub fallback: Option<&'a FallbackRecord>,
}

/// Merged time and point before typing. Also what the type clip is
/// centered on in time.
fn gated(pass1: &Pass1Result, pass2: Option<&Pass2Result>, duration: f64, p: &GateParams) -> ((f64, Source), ((f64, f64), Source)) {
    let fine = pass2.copied().unwrap_or(Pass2Result::SENTINEL);
    let window = refinement_window(pass1.t1, duration, p.window_delta);
    let time = if p.use_pass2_time {
        gate1_temporal(pass1.t1, &fine, window, p.tau)
    } else {
        (pass1.t1, Source::Pass1)
    };
    let space = if p.use_pass2_space {
        gate2_spatial((pass1.raw_x1, pass1.raw_y1), (fine.raw_x2, fine.raw_y2), p.margin)
    } else {
        (pass1.point(), Source::Pass1)
    };
    // The fine pass may answer outside the clip; a prediction never does.
    ((time.0.clamp(0.0, duration), time.1), space)
}

/// The final answer for one video. Pure: identical inputs give identical
/// bits.
pub fn decide(video_id: &str, r: PassResults<'_>, p: &GateParams) -> Prediction {
    let Some(pass1) = r.pass1 else {
        let guess = r.fallback.map(|f| f.guess).unwrap_or(FallbackGuess {
            time: r.duration / 2.0,
            x: 0.5,
            y: 0.5,
            collision: CollisionType::Single,
        });
        return Prediction {
            video_id: video_id.to_string(),
            t_star: guess.time,
            x_star: guess.x,
            y_star: guess.y,
            c_star: guess.collision,
            provenance: Provenance {
                pass1_ok: false,
                pass2_ok: false,
                typing_ok: false,
                time_source: None,
                space_source: None,
                type_source: TypeSource::Fallback,
            },
        };
    };
    let ((t_star, time_source), ((x_star, y_star), space_source)) = gated(pass1, r.pass2, r.duration, p);
    let (c_star, type_source) = match r.specialist {
        Some(c) if p.use_specialist_type => (c, TypeSource::Specialist),
        _ => (pass1.c1, TypeSource::Pass1Backup),
    };
    Prediction {
        video_id: video_id.to_string(),
        t_star,
        x_star,
        y_star,
        c_star,
        provenance: Provenance {
            pass1_ok: true,
            pass2_ok: r.pass2.is_some(),
            typing_ok: r.specialist.is_some(),
            time_source: Some(time_source),
            space_source: Some(space_source),
            type_source,
        },
    }
}

/// Re-runs the gates on a stored trace under new parameters. Model answers
/// are reused; nothing is called again.
pub fn regate(trace: &PassTrace, p: &GateParams) -> Prediction {
    decide(
        &trace.video_id,
        PassResults {
            duration: trace.duration,
            pass1: trace.pass1.as_ref(),
            pass2: trace.pass2.as_ref(),
            specialist: trace.specialist,
            fallback: trace.fallback.as_ref(),
        },
        p,
    )
}

/// Bounded concurrency per stage.
#[derive(Debug)]
pub struct StageLimits {
    pub pass1: Semaphore,
    pub pass2: Semaphore,
    pub typing: Semaphore,
}

impl StageLimits {
    pub fn new(w: Workers) -> Self {
        StageLimits {
            pass1: Semaphore::new(w.pass1),
            pass2: Semaphore::new(w.pass2),
            typing: Semaphore::new(w.typing),
        }
    }
}

/// Shared state for grounding many videos concurrently.
pub struct Grounder {
    pub cfg: RunConfig,
    pub gateway: Gateway,
    pub extractor: Arc<dyn FrameExtractor>,
    pub fallback: Arc<dyn FallbackPredictor>,
    limits: StageLimits,
}

/// Wall-clock time spent in each stage for one video.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageLatency {
    pub pass1: Option<Duration>,
    pub pass2: Option<Duration>,
    pub typing: Option<Duration>,
}

#[derive(Debug, Clone)]
pub struct VideoOutcome {
    pub trace: PassTrace,
    pub latency: StageLatency,
}

/// Picks the fallback implied by the config.
pub fn fallback_for(cfg: &RunConfig) -> Arc<dyn FallbackPredictor> {
    match (cfg.fallback_mode, &cfg.fallback_cmd) {
        (FallbackMode::PhysicsPlugin, Some(cmd)) => Arc::new(CommandFallback::new(cmd.clone())),
        _ => Arc::new(NaiveFill),
    }
}

/// Gateway, extractor and fallback as the config describes them. With
/// `offline` the providers are mocks and no API keys are required.
pub fn grounder_from_config(cfg: RunConfig, offline: bool) -> Result<Grounder, ConfigError> {
    let mut grounding = ProviderProfile::from_config(ProviderRole::Grounding, &cfg)?;
    let mut typing = ProviderProfile::from_config(ProviderRole::Typing, &cfg)?;
    if offline {
        grounding.require_credentials = false;
        typing.require_credentials = false;
    }
    let gateway = Gateway::new(grounding, typing);
    gateway.check_credentials()?;
    let extractor = Arc::new(AutoExtractor::new(cfg.extractor_cmd.as_deref()));
    let fallback = fallback_for(&cfg);
    Ok(Grounder::new(cfg, gateway, extractor, fallback))
}

fn failed_call(kind: PassKind, error: String) -> CallRecord {
    CallRecord {
        kind,
        request_fingerprint: String::new(),
        status: CallStatus::Failed,
        attempts: 0,
        raw_text: String::new(),
        error: Some(error),
        parse_error: None,
    }
}

impl Grounder {
    pub fn new(
        cfg: RunConfig,
        gateway: Gateway,
        extractor: Arc<dyn FrameExtractor>,
        fallback: Arc<dyn FallbackPredictor>,
    ) -> Grounder {
        let limits = StageLimits::new(cfg.workers);
        Grounder {
            cfg,
            gateway,
            extractor,
            fallback,
            limits,
        }
    }

    /// Extracts frames, renders the prompt and calls the model. Extraction
    /// problems are reported as a failed call with zero attempts.
    async fn run_pass(
        &self,
        video: &VideoRecord,
        plan: Result<SamplingPlan, SamplerError>,
        kind: PassKind,
    ) -> (CallRecord, Duration) {
        let started = Instant::now();
        let plan = match plan {
            Ok(p) => p,
            Err(e) => return (failed_call(kind, e.to_string()), started.elapsed()),
        };
        let window = (kind == PassKind::Fine).then_some(plan.window);
        let extractor = Arc::clone(&self.extractor);
        let v = video.clone();
        let frames = match tokio::task::spawn_blocking(move || extractor.extract(&plan, &v)).await {
            Ok(Ok(f)) => f,
            Ok(Err(e)) => return (failed_call(kind, format!("extraction: {e}")), started.elapsed()),
            Err(e) => return (failed_call(kind, format!("extraction task: {e}")), started.elapsed()),
        };
        let message = match render_prompt(&PromptTemplate::for_kind(kind), video, window)
            .and_then(|prompt| build_message(&prompt, &frames, kind))
        {
            Ok(m) => m,
            Err(e) => return (failed_call(kind, e.to_string()), started.elapsed()),
        };
        let record = match self.gateway.call(&video.video_id, &message).await {
            Ok(out) => CallRecord {
                kind,
                request_fingerprint: out.request_fingerprint,
                status: out.status,
                attempts: out.attempts,
                raw_text: out.raw_text,
                error: out.error,
                parse_error: None,
            },
            Err(e) => failed_call(kind, e.to_string()),
        };
        (record, started.elapsed())
    }

    fn run_fallback(&self, video: &VideoRecord) -> FallbackRecord {
        if self.fallback.is_naive() {
            return FallbackRecord {
                source: FallbackSource::NaiveFill,
                guess: naive_fill(video),
                error: None,
            };
        }
        match self.fallback.predict(video) {
            Ok(guess) => FallbackRecord {
                source: FallbackSource::Plugin,
                guess,
                error: None,
            },
            Err(e) => {
                tracing::warn!(video_id = %video.video_id, error = %e, "fallback plugin failed, using naive fill");
                FallbackRecord {
                    source: FallbackSource::NaiveFill,
                    guess: naive_fill(video),
                    error: Some(e.to_string()),
                }
            }
        }
    }

    /// Grounds one video. Never fails: every failure mode is folded into the
    /// trace and the prediction's provenance.
    pub async fn ground_video(self: &Arc<Self>, video: VideoRecord) -> VideoOutcome {
        let params = GateParams::from(&self.cfg);
        let mut latency = StageLatency::default();
        let mut trace = PassTrace {
            video_id: video.video_id.clone(),
            duration: video.duration,
            width: video.width,
            height: video.height,
            calls: Vec::new(),
            pass1: None,
            window: None,
            pass2: None,
            specialist: None,
            fallback: None,
            prediction: decide(&video.video_id, PassResults {
                duration: video.duration,
                pass1: None,
                pass2: None,
                specialist: None,
                fallback: None,
            }, &params),
        };

        let (mut call, took) = {
            let _permit = self.limits.pass1.acquire().await.expect("semaphore open");
            self.run_pass(&video, build_pass1_plan(&video), PassKind::Coarse).await
        };
        latency.pass1 = Some(took);
        if call.status == CallStatus::Ok {
            match parse_pass1(&call.raw_text, video.duration) {
                Ok(p) => trace.pass1 = Some(p),
                Err(e) => call.parse_error = Some(e.to_string()),
            }
        }
        trace.calls.push(call);

        let Some(pass1) = trace.pass1 else {
            let this = Arc::clone(self);
            let v = video.clone();
            let record = tokio::task::spawn_blocking(move || this.run_fallback(&v))
                .await
                .unwrap_or_else(|e| FallbackRecord {
                    source: FallbackSource::NaiveFill,
                    guess: naive_fill(&video),
                    error: Some(format!("fallback task: {e}")),
                });
            trace.fallback = Some(record);
            trace.prediction = regate(&trace, &params);
            return VideoOutcome { trace, latency };
        };

        trace.window = Some(refinement_window(pass1.t1, video.duration, self.cfg.window_delta));
        if self.cfg.use_pass2_time || self.cfg.use_pass2_space {
            let (mut call, took) = {
                let _permit = self.limits.pass2.acquire().await.expect("semaphore open");
                self.run_pass(&video, build_pass2_plan(&video, pass1.t1, &self.cfg), PassKind::Fine)
                    .await
            };
            latency.pass2 = Some(took);
            if call.status == CallStatus::Ok {
                match parse_pass2(&call.raw_text) {
                    Ok(p) => trace.pass2 = Some(p),
                    Err(e) => call.parse_error = Some(e.to_string()),
                }
            }
            trace.calls.push(call);
        }

        if self.cfg.use_specialist_type {
            let ((t_star, _), _) = gated(&pass1, trace.pass2.as_ref(), video.duration, &params);
            let plan = build_type_clip_plan(&video, t_star, pass1.point(), &self.cfg);
            let (mut call, took) = {
                let _permit = self.limits.typing.acquire().await.expect("semaphore open");
                self.run_pass(&video, plan, PassKind::Type).await
            };
            latency.typing = Some(took);
            if call.status == CallStatus::Ok {
                match parse_type_answer(&call.raw_text) {
                    Ok(c) => trace.specialist = Some(c),
                    Err(e) => call.parse_error = Some(e.to_string()),
                }
            }
            trace.calls.push(call);
        }

        trace.prediction = regate(&trace, &params);
        VideoOutcome { trace, latency }
    }
}
