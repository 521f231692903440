//! Benchmark clips and the manifest CSV that lists them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("reading manifest {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("manifest row {row} ({video_id}): {reason}")]
    InvalidRow {
        row: usize,
        video_id: String,
        reason: String,
    },
    #[error("duplicate video_id `{0}` in manifest")]
    Duplicate(String),
}

/// One benchmark clip. `path` points at the media file, or at a directory
/// of pre-extracted frames when the image-directory extractor is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub path: PathBuf,
    pub duration: f64,
    pub width: u32,
    pub height: u32,
}

impl VideoRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.video_id.trim().is_empty() {
            return Err("empty video_id".into());
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(format!("duration must be positive, got {}", self.duration));
        }
        if self.width == 0 || self.height == 0 {
            return Err(format!("frame size must be positive, got {}x{}", self.width, self.height));
        }
        Ok(())
    }
}

/// Reads `video_id,path,duration,width,height`. Relative paths are resolved
/// against the manifest's directory. Rows come back sorted by `video_id`.
pub fn read_manifest(path: &Path) -> Result<Vec<VideoRecord>, ManifestError> {
    let csv_err = |source| ManifestError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut videos = Vec::new();
    for (i, row) in reader.deserialize::<VideoRecord>().enumerate() {
        let mut video = row.map_err(csv_err)?;
        video.validate().map_err(|reason| ManifestError::InvalidRow {
            row: i + 1,
            video_id: video.video_id.clone(),
            reason,
        })?;
        if video.path.is_relative() {
            video.path = base.join(&video.path);
        }
        videos.push(video);
    }
    videos.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    if let Some(w) = videos.windows(2).find(|w| w[0].video_id == w[1].video_id) {
        return Err(ManifestError::Duplicate(w[0].video_id.clone()));
    }
    Ok(videos)
}

pub fn write_manifest(path: &Path, videos: &[VideoRecord]) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_path(path)?;
    for v in videos {
        writer.serialize(v)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip_and_sorting() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "video_id,path,duration,width,height\nb,clips/b,20,1280,720\na,/abs/a,26.8,1920,1080\n").unwrap();
        let videos = read_manifest(&path).unwrap();
        assert_eq!(videos[0].video_id, "a");
        assert_eq!(videos[0].path, PathBuf::from("/abs/a"));
        assert_eq!(videos[1].path, dir.path().join("clips/b"));
        assert_eq!(videos[0].duration, 26.8);
    }

    #[test]
    fn rejects_non_positive_duration_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "video_id,path,duration,width,height\na,x,0,10,10\n").unwrap();
        assert!(matches!(read_manifest(&path), Err(ManifestError::InvalidRow { .. })));
        std::fs::write(&path, "video_id,path,duration,width,height\na,x,1,10,10\na,y,2,10,10\n").unwrap();
        assert!(matches!(read_manifest(&path), Err(ManifestError::Duplicate(_))));
    }
}
