//! Frame-sampling plans for the three model calls, and the extractor
//! contract that materializes them.

mod extract;

pub use extract::{
    AutoExtractor, CommandExtractor, ExtractError, Frame, FrameExtractor, FrameSet, ImageDirExtractor,
    DEFAULT_FFMPEG_TEMPLATE,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::video::VideoRecord;

/// Maximum frames per coarse or fine call.
pub const MAX_FRAMES: usize = 30;
pub const PASS1_LONG_EDGE: u32 = 720;
pub const PASS2_LONG_EDGE: u32 = 1024;
pub const TYPE_CLIP_LONG_EDGE: u32 = 1024;
pub const PASS2_FPS: f64 = 5.0;
/// Type clip spans `[t* - 3, t* + 2]`.
pub const TYPE_CLIP_BEFORE: f64 = 3.0;
pub const TYPE_CLIP_AFTER: f64 = 2.0;

const EDGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("invalid sampling input: {0}")]
    InvalidInput(String),
}

/// The three model calls made per video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassKind {
    Coarse,
    Fine,
    Type,
}

impl PassKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PassKind::Coarse => "coarse",
            PassKind::Fine => "fine",
            PassKind::Type => "type",
        }
    }

    pub fn parse(s: &str) -> Option<PassKind> {
        match s {
            "coarse" => Some(PassKind::Coarse),
            "fine" => Some(PassKind::Fine),
            "type" => Some(PassKind::Type),
            _ => None,
        }
    }

    /// Renders a frame timestamp for the `[Frame at ...s]` tag. Coarse
    /// frames land on whole seconds for clips up to 30 s and print without
    /// a fraction; longer clips keep one decimal so tags stay truthful.
    pub fn format_timestamp(self, t: f64) -> String {
        match self {
            PassKind::Coarse if (t - t.round()).abs() < 1e-9 => format!("{:.0}", t.round()),
            _ => format!("{t:.1}"),
        }
    }
}

/// Normalized crop rectangle `[x0, y0, x1, y1]` in `[0, 1]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropRect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl CropRect {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub pass_kind: PassKind,
    pub timestamps: Vec<f64>,
    pub long_edge_px: u32,
    pub crop: Option<CropRect>,
    pub window: (f64, f64),
}

impl SamplingPlan {
    pub fn frame_tags(&self) -> Vec<String> {
        self.timestamps
            .iter()
            .map(|&t| self.pass_kind.format_timestamp(t))
            .collect()
    }
}

fn check_duration(video: &VideoRecord) -> Result<f64, SamplerError> {
    let d = video.duration;
    if d.is_finite() && d > 0.0 {
        Ok(d)
    } else {
        Err(SamplerError::InvalidInput(format!(
            "{}: duration must be positive, got {d}",
            video.video_id
        )))
    }
}

fn check_time(video: &VideoRecord, t: f64, what: &str) -> Result<(), SamplerError> {
    if t.is_finite() && (0.0..=video.duration).contains(&t) {
        Ok(())
    } else {
        Err(SamplerError::InvalidInput(format!(
            "{}: {what} {t} outside [0, {}]",
            video.video_id, video.duration
        )))
    }
}

/// Regular grid from `w_min` at `fps`, strictly before `w_max`.
fn grid(window: (f64, f64), fps: f64, cap: Option<usize>) -> Vec<f64> {
    let (w_min, w_max) = window;
    let mut out = Vec::new();
    for k in 0.. {
        if cap.is_some_and(|c| out.len() >= c) {
            break;
        }
        let t = w_min + k as f64 / fps;
        if t >= w_max - EDGE_EPS {
            break;
        }
        out.push(t);
    }
    if out.is_empty() {
        out.push(w_min);
    }
    out
}

/// Coarse pass: 1 fps over the whole clip, at most 30 frames. Clips longer
/// than 30 s are covered with a uniform stride of `D / 30`.
pub fn build_pass1_plan(video: &VideoRecord) -> Result<SamplingPlan, SamplerError> {
    let d = check_duration(video)?;
    let timestamps = if d <= MAX_FRAMES as f64 {
        let n = (d.floor() as usize + 1).min(MAX_FRAMES);
        (0..n).map(|i| i as f64).collect()
    } else {
        let stride = d / MAX_FRAMES as f64;
        (0..MAX_FRAMES).map(|i| i as f64 * stride).collect()
    };
    Ok(SamplingPlan {
        pass_kind: PassKind::Coarse,
        timestamps,
        long_edge_px: PASS1_LONG_EDGE,
        crop: None,
        window: (0.0, d),
    })
}

/// Refinement window `[t1 - Δ, t1 + Δ]` clamped to the clip.
pub fn refinement_window(t1: f64, duration: f64, delta: f64) -> (f64, f64) {
    ((t1 - delta).max(0.0), (t1 + delta).min(duration))
}

/// Fine pass: 5 fps inside the refinement window, at most 30 frames.
pub fn build_pass2_plan(video: &VideoRecord, t1: f64, cfg: &RunConfig) -> Result<SamplingPlan, SamplerError> {
    let d = check_duration(video)?;
    check_time(video, t1, "t1")?;
    if !(cfg.window_delta > 0.0) {
        return Err(SamplerError::InvalidInput("window_delta must be > 0".into()));
    }
    let window = refinement_window(t1, d, cfg.window_delta);
    Ok(SamplingPlan {
        pass_kind: PassKind::Fine,
        timestamps: grid(window, PASS2_FPS, Some(MAX_FRAMES)),
        long_edge_px: PASS2_LONG_EDGE,
        crop: None,
        window,
    })
}

/// Square crop whose side is `1 / crop_factor` of the frame's shorter
/// dimension, centered on `center` and translated (never shrunk) to stay
/// inside the frame.
pub fn centered_crop(center: (f64, f64), width: u32, height: u32, crop_factor: f64) -> CropRect {
    let side_px = width.min(height) as f64 / crop_factor;
    let wn = (side_px / width as f64).min(1.0);
    let hn = (side_px / height as f64).min(1.0);
    let x0 = (center.0 - wn / 2.0).clamp(0.0, 1.0 - wn);
    let y0 = (center.1 - hn / 2.0).clamp(0.0, 1.0 - hn);
    CropRect {
        x0,
        y0,
        x1: x0 + wn,
        y1: y0 + hn,
    }
}

/// Short clip around `t_star` for the specialist typing call, cropped
/// around the Pass-1 point.
pub fn build_type_clip_plan(
    video: &VideoRecord,
    t_star: f64,
    center: (f64, f64),
    cfg: &RunConfig,
) -> Result<SamplingPlan, SamplerError> {
    let d = check_duration(video)?;
    check_time(video, t_star, "t*")?;
    let in_unit = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
    if !(in_unit(center.0) && in_unit(center.1)) {
        return Err(SamplerError::InvalidInput(format!(
            "{}: crop center {center:?} outside [0,1]²",
            video.video_id
        )));
    }
    let window = ((t_star - TYPE_CLIP_BEFORE).max(0.0), (t_star + TYPE_CLIP_AFTER).min(d));
    Ok(SamplingPlan {
        pass_kind: PassKind::Type,
        timestamps: grid(window, cfg.type_clip_fps, None),
        long_edge_px: TYPE_CLIP_LONG_EDGE,
        crop: Some(centered_crop(center, video.width, video.height, cfg.crop_factor)),
        window,
    })
}
