//! Prediction dumps: `frame,speaker,p1..p60`, one row per frame and
//! perspective.

use std::path::Path;

use super::score::PredictionTrack;
use crate::corpus::Speaker;
use crate::error::{Error, Result};
use crate::nn::HORIZON;

pub fn write_predictions(path: &Path, track: &PredictionTrack) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["frame".to_string(), "speaker".to_string()];
    header.extend((1..=HORIZON).map(|i| format!("p{i}")));
    w.write_record(&header)?;
    for frame in 0..track.len() {
        for sp in Speaker::BOTH {
            let mut row = vec![frame.to_string(), sp.to_string()];
            row.extend(track.probs[sp.index()][frame].iter().map(f64::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions(path: &Path) -> Result<PredictionTrack> {
    let origin = path.display().to_string();
    let mut r = csv::Reader::from_path(path)?;
    let mut probs: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |message: String| Error::Parse {
            path: origin.clone(),
            line,
            message,
        };
        if rec.len() != HORIZON + 2 {
            return Err(bad(format!("expected {} fields, found {}", HORIZON + 2, rec.len())));
        }
        let frame: usize = rec[0].parse().map_err(|_| bad(format!("bad frame `{}`", &rec[0])))?;
        let sp: Speaker = rec[1].parse().map_err(|_| bad(format!("bad speaker `{}`", &rec[1])))?;
        let v = (2..rec.len())
            .map(|k| rec[k].parse::<f64>().map_err(|_| bad(format!("bad probability `{}`", &rec[k]))))
            .collect::<Result<Vec<_>>>()?;
        let slot = &mut probs[sp.index()];
        if frame != slot.len() {
            return Err(bad(format!("frame {frame} out of order for speaker {sp}")));
        }
        slot.push(v);
    }
    let [a, b] = probs;
    PredictionTrack::new(a, b)
}
