//! The three prompt templates, kept byte-for-byte. Only `{duration}`,
//! `{start}` and `{end}` are placeholders; the JSON skeletons in the bodies
//! are literal text.

use super::GatewayError;
use crate::sampler::PassKind;
use crate::video::VideoRecord;

pub const COARSE_TEMPLATE: &str = "This is a traffic surveillance video sampled at
1 frame per second. Frame numbers correspond to
seconds in the video (frame 0 = 0s, frame 1 = 1s,
...). The video duration is {duration} seconds.

A traffic accident occurs in this video. Please
analyze carefully and answer:

1. Time: At what second does the collision or
   accident impact occur?
2. Location: Point to the exact location in the
   frame where the impact happens. Return
   coordinates as values between 0 and 1000,
   where (0,0) is top-left and (1000,1000) is
   bottom-right of the frame.
3. Type: head-on, rear-end, t-bone, sideswipe,
   or single.

Return ONLY a JSON object:
{\"time\": <seconds>, \"x\": <0-1000>,
 \"y\": <0-1000>, \"type\": \"<type>\"}";

pub const FINE_TEMPLATE: &str = "These frames are extracted at 5 frames per second
from a traffic surveillance video. Each frame is
labeled with its precise timestamp. The time
window shown is from {start}s to {end}s.

A traffic accident occurs somewhere in this video.
If the collision happens within this time window,
identify:
1. Exact time: The precise moment (to 0.1 second)
   of collision or impact.
2. Exact location: The impact point, as
   coordinates between 0 and 1000.

If you cannot see a collision in these frames,
return time as -1.

Return ONLY a JSON object:
{\"time\": <seconds with 1 decimal or -1>,
 \"x\": <0-1000>, \"y\": <0-1000>}";

pub const TYPE_TEMPLATE: &str = "A traffic collision HAS occurred in this
surveillance clip. You MUST classify its type.
This clip shows ~6 seconds leading up to and
including the collision moment.

Collision types - pick exactly ONE:
- head_on: Two vehicles approach from OPPOSITE
  directions, collide front-to-front.
- rear_end: Two vehicles travel SAME direction;
  trailing one hits leading one from behind.
- t_bone: One vehicle strikes the SIDE of another
  at roughly 90 degrees.
- sideswipe: Two vehicles in parallel lanes make
  lateral/glancing contact.
- single: Only ONE vehicle involved.

Watch vehicle MOTION carefully across the clip.
You MUST pick the most likely type.";

const PLACEHOLDERS: [&str; 3] = ["{duration}", "{start}", "{end}"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub kind: PassKind,
    pub body: &'static str,
}

impl PromptTemplate {
    pub fn for_kind(kind: PassKind) -> PromptTemplate {
        let body = match kind {
            PassKind::Coarse => COARSE_TEMPLATE,
            PassKind::Fine => FINE_TEMPLATE,
            PassKind::Type => TYPE_TEMPLATE,
        };
        PromptTemplate { kind, body }
    }
}

/// Seconds in prompts always carry one decimal: `26.8`, `7.0`.
pub fn format_prompt_seconds(t: f64) -> String {
    format!("{t:.1}")
}

pub fn render_prompt(
    template: &PromptTemplate,
    video: &VideoRecord,
    window: Option<(f64, f64)>,
) -> Result<String, GatewayError> {
    let rendered = match template.kind {
        PassKind::Coarse => template
            .body
            .replace("{duration}", &format_prompt_seconds(video.duration)),
        PassKind::Fine => {
            let (start, end) = window.ok_or_else(|| {
                GatewayError::InvalidInput("fine prompt requires a time window".into())
            })?;
            template
                .body
                .replace("{start}", &format_prompt_seconds(start))
                .replace("{end}", &format_prompt_seconds(end))
        }
        PassKind::Type => template.body.to_string(),
    };
    if let Some(p) = PLACEHOLDERS.iter().find(|p| rendered.contains(*p)) {
        return Err(GatewayError::InvalidInput(format!("unresolved placeholder {p}")));
    }
    Ok(rendered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn video(d: f64) -> VideoRecord {
        VideoRecord {
            video_id: "v".into(),
            path: PathBuf::new(),
            duration: d,
            width: 1280,
            height: 720,
        }
    }

    #[test]
    fn coarse_states_duration() {
        let p = render_prompt(&PromptTemplate::for_kind(PassKind::Coarse), &video(26.8), None).unwrap();
        assert!(p.contains("The video duration is 26.8 seconds."));
        assert!(p.ends_with("Return ONLY a JSON object:\n{\"time\": <seconds>, \"x\": <0-1000>,\n \"y\": <0-1000>, \"type\": \"<type>\"}"));
    }

    #[test]
    fn fine_states_window_with_one_decimal() {
        let p = render_prompt(&PromptTemplate::for_kind(PassKind::Fine), &video(26.8), Some((7.0, 13.0))).unwrap();
        assert!(p.contains("from 7.0s to 13.0s"));
        assert!(p.contains("Return ONLY a JSON object:"));
    }

    #[test]
    fn fine_requires_window() {
        assert!(render_prompt(&PromptTemplate::for_kind(PassKind::Fine), &video(26.8), None).is_err());
    }

    #[test]
    fn type_prompt_forbids_abstention() {
        let p = render_prompt(&PromptTemplate::for_kind(PassKind::Type), &video(26.8), None).unwrap();
        assert!(p.contains("You MUST pick the most likely type."));
        assert_eq!(p, TYPE_TEMPLATE);
    }
}
