//! Prediction and ground-truth CSVs, both `video_id,time,x,y,type`.
//! Type strings go through [`normalize_type`], so `head_on`, `Head-On` and
//! `head-on` all read the same.

use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use super::{EvalError, GroundTruth, PredictionRow};
use crate::parser::{normalize_type, CollisionType};

#[derive(Deserialize)]
struct RawRow {
    video_id: String,
    time: f64,
    x: f64,
    y: f64,
    #[serde(rename = "type")]
    kind: String,
}

fn read_rows(path: &Path) -> Result<Vec<(String, f64, f64, f64, CollisionType)>, EvalError> {
    let p = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| EvalError::Read { path: p.clone(), message: e.to_string() })?;
    let mut out = Vec::new();
    for (i, rec) in reader.deserialize::<RawRow>().enumerate() {
        let invalid = |message: String| EvalError::InvalidRow { path: p.clone(), row: i + 1, message };
        let raw = rec.map_err(|e| invalid(e.to_string()))?;
        if ![raw.time, raw.x, raw.y].iter().all(|v| v.is_finite()) {
            return Err(invalid(format!("non-finite value for {}", raw.video_id)));
        }
        let kind = normalize_type(&raw.kind).map_err(|e| invalid(e.to_string()))?;
        out.push((raw.video_id, raw.time, raw.x, raw.y, kind));
    }
    Ok(out)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>, EvalError> {
    Ok(read_rows(path)?
        .into_iter()
        .map(|(video_id, time, x, y, collision)| PredictionRow { video_id, time, x, y, collision })
        .collect())
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruth>, EvalError> {
    Ok(read_rows(path)?
        .into_iter()
        .map(|(video_id, time, x, y, collision)| GroundTruth { video_id, time, x, y, collision })
        .collect())
}

/// Writes rows in the order given, floats in shortest round-trip form.
pub fn write_predictions<W: Write>(out: W, rows: &[PredictionRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["video_id", "time", "x", "y", "type"])?;
    for r in rows {
        w.write_record([
            r.video_id.clone(),
            r.time.to_string(),
            r.x.to_string(),
            r.y.to_string(),
            r.collision.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tolerant_type_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        std::fs::write(&path, "video_id,time,x,y,type\na,1.5,0.2,0.3,Head_On\nb,2,0.5,0.5,t-bone\n").unwrap();
        let rows = read_predictions(&path).unwrap();
        assert_eq!(rows[0].collision, CollisionType::HeadOn);
        assert_eq!(rows[1].time, 2.0);
        std::fs::write(&path, "video_id,time,x,y,type\na,1.5,0.2,0.3,crash\n").unwrap();
        assert!(matches!(read_predictions(&path), Err(EvalError::InvalidRow { row: 1, .. })));
    }

    proptest! {
        #[test]
        fn write_then_read_is_exact(t in -1e3f64..1e3, x in -1.0f64..2.0, y in -1.0f64..2.0, k in 0usize..5) {
            let rows = vec![PredictionRow { video_id: "v,1".into(), time: t, x, y, collision: CollisionType::ALL[k] }];
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.csv");
            write_predictions(std::fs::File::create(&path).unwrap(), &rows).unwrap();
            prop_assert_eq!(read_predictions(&path).unwrap(), rows);
        }
    }
}
