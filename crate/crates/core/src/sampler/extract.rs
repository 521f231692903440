use std::collections::HashMap;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::process::Command;

use image::imageops::FilterType;
use image::{DynamicImage, ImageFormat, ImageReader};
use thiserror::Error;

use super::{CropRect, SamplingPlan};
use crate::video::VideoRecord;

/// A reasonable ffmpeg invocation for the command backend. `{crop}` expands
/// to a `crop=...,` filter prefix (or nothing), so it composes with scale.
pub const DEFAULT_FFMPEG_TEMPLATE: &str = "ffmpeg -nostdin -loglevel error -ss {timestamp} -i {input} -frames:v 1 \
-vf \"{crop}scale='if(gt(iw,ih),min({long_edge},iw),-2)':'if(gt(iw,ih),-2,min({long_edge},ih))'\" \
-f image2pipe -vcodec mjpeg -";

const JPEG_QUALITY: u8 = 90;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("{video_id}: media unreadable: {reason}")]
    Unreadable { video_id: String, reason: String },
    #[error("{video_id}: no decodable frame at or before {timestamp}s")]
    NoFrame { video_id: String, timestamp: f64 },
    #[error("{video_id}: image processing failed: {reason}")]
    Image { video_id: String, reason: String },
}

impl ExtractError {
    pub fn video_id(&self) -> &str {
        match self {
            ExtractError::Unreadable { video_id, .. }
            | ExtractError::NoFrame { video_id, .. }
            | ExtractError::Image { video_id, .. } => video_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub timestamp: f64,
    /// Encoded image (JPEG unless the command backend emitted otherwise).
    pub image: Vec<u8>,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameSet {
    pub frames: Vec<Frame>,
}

impl FrameSet {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Materializes a [`SamplingPlan`]: one frame per timestamp, in order,
/// cropped first and then downscaled so the long edge is at most
/// `plan.long_edge_px`.
pub trait FrameExtractor: Send + Sync {
    fn extract(&self, plan: &SamplingPlan, video: &VideoRecord) -> Result<FrameSet, ExtractError>;
}

fn crop_and_fit(img: DynamicImage, crop: Option<&CropRect>, long_edge: u32) -> DynamicImage {
    let img = match crop {
        Some(c) => {
            let (w, h) = (img.width() as f64, img.height() as f64);
            let x0 = (c.x0 * w).floor().clamp(0.0, w - 1.0) as u32;
            let y0 = (c.y0 * h).floor().clamp(0.0, h - 1.0) as u32;
            let x1 = ((c.x1 * w).ceil() as u32).clamp(x0 + 1, img.width());
            let y1 = ((c.y1 * h).ceil() as u32).clamp(y0 + 1, img.height());
            img.crop_imm(x0, y0, x1 - x0, y1 - y0)
        }
        None => img,
    };
    if img.width().max(img.height()) > long_edge {
        img.resize(long_edge, long_edge, FilterType::Triangle)
    } else {
        img
    }
}

fn encode_jpeg(img: &DynamicImage) -> Result<Vec<u8>, image::ImageError> {
    let mut out = Vec::new();
    let rgb = img.to_rgb8();
    let encoder = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut out, JPEG_QUALITY);
    rgb.write_with_encoder(encoder)?;
    Ok(out)
}

/// Reads pre-extracted frames from a directory whose files are named by
/// their timestamp in seconds (`12.jpg`, `7.2.png`, ...). Each planned
/// timestamp takes the nearest frame at or before it; a timestamp before the
/// first file takes the first file.
#[derive(Debug, Default, Clone)]
pub struct ImageDirExtractor;

impl ImageDirExtractor {
    fn index(dir: &Path, video_id: &str) -> Result<Vec<(f64, PathBuf)>, ExtractError> {
        let unreadable = |reason: String| ExtractError::Unreadable {
            video_id: video_id.to_string(),
            reason,
        };
        let entries = std::fs::read_dir(dir).map_err(|e| unreadable(format!("{}: {e}", dir.display())))?;
        let mut frames = Vec::new();
        for entry in entries.flatten() {
            let path = entry.path();
            let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
            if !matches!(ext.as_deref(), Some("jpg" | "jpeg" | "png")) {
                continue;
            }
            if let Some(t) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse::<f64>().ok()) {
                if t.is_finite() {
                    frames.push((t, path));
                }
            }
        }
        if frames.is_empty() {
            return Err(unreadable(format!("no timestamped frames in {}", dir.display())));
        }
        frames.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(frames)
    }
}

impl FrameExtractor for ImageDirExtractor {
    fn extract(&self, plan: &SamplingPlan, video: &VideoRecord) -> Result<FrameSet, ExtractError> {
        let index = Self::index(&video.path, &video.video_id)?;
        let image_err = |reason: String| ExtractError::Image {
            video_id: video.video_id.clone(),
            reason,
        };
        let mut decoded: HashMap<usize, (Vec<u8>, u32, u32)> = HashMap::new();
        let mut frames = Vec::with_capacity(plan.timestamps.len());
        for &t in &plan.timestamps {
            let slot = index
                .iter()
                .rposition(|(ft, _)| *ft <= t + 1e-6)
                .unwrap_or(0);
            if let std::collections::hash_map::Entry::Vacant(e) = decoded.entry(slot) {
                let img = image::open(&index[slot].1).map_err(|e| image_err(e.to_string()))?;
                let img = crop_and_fit(img, plan.crop.as_ref(), plan.long_edge_px);
                let bytes = encode_jpeg(&img).map_err(|e| image_err(e.to_string()))?;
                e.insert((bytes, img.width(), img.height()));
            }
            let (bytes, width, height) = decoded[&slot].clone();
            frames.push(Frame {
                timestamp: t,
                image: bytes,
                width,
                height,
            });
        }
        Ok(FrameSet { frames })
    }
}

/// Shells out once per timestamp. The template's stdout must be a single
/// encoded image. A timestamp that yields nothing (past the real end of the
/// media) reuses the nearest earlier frame under its own label.
#[derive(Debug, Clone)]
pub struct CommandExtractor {
    template: String,
}

impl CommandExtractor {
    pub fn new(template: impl Into<String>) -> Self {
        CommandExtractor {
            template: template.into(),
        }
    }

    pub fn render(&self, input: &Path, timestamp: f64, long_edge: u32, crop: Option<&CropRect>) -> String {
        let crop = match crop {
            Some(c) => format!(
                "crop=iw*{:.6}:ih*{:.6}:iw*{:.6}:ih*{:.6},",
                c.width(),
                c.height(),
                c.x0,
                c.y0
            ),
            None => String::new(),
        };
        self.template
            .replace("{input}", &shell_quote(&input.to_string_lossy()))
            .replace("{timestamp}", &format!("{timestamp:.3}"))
            .replace("{long_edge}", &long_edge.to_string())
            .replace("{crop}", &crop)
    }

    fn run_one(&self, cmd: &str) -> Option<Vec<u8>> {
        let out = Command::new("sh").arg("-c").arg(cmd).output().ok()?;
        (out.status.success() && !out.stdout.is_empty()).then_some(out.stdout)
    }
}

impl FrameExtractor for CommandExtractor {
    fn extract(&self, plan: &SamplingPlan, video: &VideoRecord) -> Result<FrameSet, ExtractError> {
        if !video.path.exists() {
            return Err(ExtractError::Unreadable {
                video_id: video.video_id.clone(),
                reason: format!("{} does not exist", video.path.display()),
            });
        }
        let image_err = |reason: String| ExtractError::Image {
            video_id: video.video_id.clone(),
            reason,
        };
        let mut frames: Vec<Frame> = Vec::with_capacity(plan.timestamps.len());
        for &t in &plan.timestamps {
            let cmd = self.render(&video.path, t, plan.long_edge_px, plan.crop.as_ref());
            let Some(bytes) = self.run_one(&cmd) else {
                match frames.last() {
                    Some(prev) => {
                        let mut f = prev.clone();
                        f.timestamp = t;
                        frames.push(f);
                        continue;
                    }
                    None => {
                        return Err(ExtractError::NoFrame {
                            video_id: video.video_id.clone(),
                            timestamp: t,
                        })
                    }
                }
            };
            let reader = ImageReader::new(Cursor::new(&bytes))
                .with_guessed_format()
                .map_err(|e| image_err(e.to_string()))?;
            let format = reader.format();
            let (w, h) = reader.into_dimensions().map_err(|e| image_err(e.to_string()))?;
            let frame = if w.max(h) > plan.long_edge_px || format != Some(ImageFormat::Jpeg) {
                let img = image::load_from_memory(&bytes).map_err(|e| image_err(e.to_string()))?;
                let img = crop_and_fit(img, None, plan.long_edge_px);
                Frame {
                    timestamp: t,
                    image: encode_jpeg(&img).map_err(|e| image_err(e.to_string()))?,
                    width: img.width(),
                    height: img.height(),
                }
            } else {
                Frame {
                    timestamp: t,
                    image: bytes,
                    width: w,
                    height: h,
                }
            };
            frames.push(frame);
        }
        Ok(FrameSet { frames })
    }
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// Image directories go through [`ImageDirExtractor`], media files through
/// a [`CommandExtractor`].
#[derive(Debug, Clone)]
pub struct AutoExtractor {
    pub command: CommandExtractor,
}

impl AutoExtractor {
    pub fn new(template: Option<&str>) -> Self {
        AutoExtractor {
            command: CommandExtractor::new(template.unwrap_or(DEFAULT_FFMPEG_TEMPLATE)),
        }
    }
}

impl FrameExtractor for AutoExtractor {
    fn extract(&self, plan: &SamplingPlan, video: &VideoRecord) -> Result<FrameSet, ExtractError> {
        if video.path.is_dir() {
            ImageDirExtractor.extract(plan, video)
        } else {
            self.command.extract(plan, video)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{PassKind, SamplingPlan};
    use image::{Rgb, RgbImage};

    fn write_frame(dir: &Path, name: &str, w: u32, h: u32, shade: u8) {
        let img = RgbImage::from_pixel(w, h, Rgb([shade, 0, 0]));
        img.save(dir.join(name)).unwrap();
    }

    fn plan(ts: &[f64], long_edge: u32, crop: Option<CropRect>) -> SamplingPlan {
        SamplingPlan {
            pass_kind: PassKind::Fine,
            timestamps: ts.to_vec(),
            long_edge_px: long_edge,
            crop,
            window: (0.0, 10.0),
        }
    }

    fn video(path: &Path) -> VideoRecord {
        VideoRecord {
            video_id: "clip".into(),
            path: path.to_path_buf(),
            duration: 10.0,
            width: 64,
            height: 36,
        }
    }

    #[test]
    fn directory_backend_orders_and_substitutes() {
        let dir = tempfile::tempdir().unwrap();
        for (i, name) in ["0.png", "1.png", "2.png"].iter().enumerate() {
            write_frame(dir.path(), name, 64, 36, i as u8 * 100);
        }
        let set = ImageDirExtractor
            .extract(&plan(&[0.0, 1.0, 2.0], 720, None), &video(dir.path()))
            .unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.frames.iter().map(|f| f.timestamp).collect::<Vec<_>>(), vec![0.0, 1.0, 2.0]);
        assert_eq!((set.frames[0].width, set.frames[0].height), (64, 36));

        // Past the last frame: nearest earlier frame, label unchanged.
        let set = ImageDirExtractor
            .extract(&plan(&[1.5, 9.0], 720, None), &video(dir.path()))
            .unwrap();
        let last = ImageDirExtractor
            .extract(&plan(&[2.0], 720, None), &video(dir.path()))
            .unwrap();
        assert_eq!(set.frames[1].timestamp, 9.0);
        assert_eq!(set.frames[1].image, last.frames[0].image);
    }

    #[test]
    fn directory_backend_crops_then_downscales() {
        let dir = tempfile::tempdir().unwrap();
        write_frame(dir.path(), "0.jpg", 2000, 1000, 10);
        let set = ImageDirExtractor
            .extract(&plan(&[0.0], 720, None), &video(dir.path()))
            .unwrap();
        assert_eq!((set.frames[0].width, set.frames[0].height), (720, 360));
        let crop = CropRect { x0: 0.0, y0: 0.0, x1: 0.2, y1: 0.4 };
        let set = ImageDirExtractor
            .extract(&plan(&[0.0], 1024, Some(crop)), &video(dir.path()))
            .unwrap();
        assert_eq!((set.frames[0].width, set.frames[0].height), (400, 400));
    }

    #[test]
    fn unreadable_directory_is_an_error() {
        let err = ImageDirExtractor
            .extract(&plan(&[0.0], 720, None), &video(Path::new("/nonexistent/clip")))
            .unwrap_err();
        assert_eq!(err.video_id(), "clip");
        let empty = tempfile::tempdir().unwrap();
        assert!(ImageDirExtractor.extract(&plan(&[0.0], 720, None), &video(empty.path())).is_err());
    }

    #[test]
    fn command_backend_runs_template_and_fills_gaps() {
        let dir = tempfile::tempdir().unwrap();
        write_frame(dir.path(), "frame.png", 2000, 1000, 50);
        // Emits the image only for timestamps below 5 s.
        let template = "t={timestamp}; [ \"${t%%.*}\" -lt 5 ] && cat {input}/frame.png";
        let ex = CommandExtractor::new(template);
        let set = ex.extract(&plan(&[0.0, 4.0, 7.5], 720, None), &video(dir.path())).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.frames[0].width, 720);
        assert_eq!(set.frames[2].timestamp, 7.5);
        assert_eq!(set.frames[2].image, set.frames[1].image);

        let ex = CommandExtractor::new("exit 1");
        assert!(matches!(
            ex.extract(&plan(&[0.0], 720, None), &video(dir.path())),
            Err(ExtractError::NoFrame { .. })
        ));
    }

    #[test]
    fn command_rendering() {
        let ex = CommandExtractor::new("x {input} {timestamp} {long_edge} [{crop}]");
        let crop = CropRect { x0: 0.6, y0: 0.3, x1: 1.0, y1: 0.7 };
        assert_eq!(
            ex.render(Path::new("/a b/it's.mp4"), 7.2, 1024, Some(&crop)),
            "x '/a b/it'\\''s.mp4' 7.200 1024 [crop=iw*0.400000:ih*0.400000:iw*0.600000:ih*0.300000,]"
        );
        assert_eq!(ex.render(Path::new("/v.mp4"), 0.0, 720, None), "x '/v.mp4' 0.000 720 []");
    }
}
