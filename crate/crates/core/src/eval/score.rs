use super::events::{OnsetClass, OnsetEvent, PauseEvent, PauseOutcome, CONTINUATION_FRAMES};
use super::fscore::fscore;
use crate::error::{Error, Result};
use crate::nn::HORIZON;

/// Model output per frame for each target-speaker perspective, indexed by
/// [`crate::corpus::Speaker::index`].
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionTrack {
    pub probs: [Vec<Vec<f64>>; 2],
}

impl PredictionTrack {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Data(format!(
                "perspectives cover {} and {} frames",
                a.len(),
                b.len()
            )));
        }
        if let Some(v) = a.iter().chain(&b).find(|v| v.len() != HORIZON) {
            return Err(Error::Dimension {
                context: "prediction vector".into(),
                expected: HORIZON,
                got: v.len(),
            });
        }
        Ok(Self { probs: [a, b] })
    }

    pub fn len(&self) -> usize {
        self.probs[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn at(&self, perspective: usize, frame: usize) -> Result<&[f64]> {
        self.probs[perspective]
            .get(frame)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Data(format!("frame {frame} outside a {}-frame track", self.len())))
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Compares both speakers' mean probability over the first second of the
/// horizon at the decision frame. A tie goes to the holder.
pub fn score_pause(track: &PredictionTrack, event: &PauseEvent) -> Result<PauseOutcome> {
    let holder = event.holder.index();
    let other = event.holder.other().index();
    let h = mean(&track.at(holder, event.decision_frame)?[..CONTINUATION_FRAMES]);
    let o = mean(&track.at(other, event.decision_frame)?[..CONTINUATION_FRAMES]);
    if h == o {
        log::debug!("tied pause scores at frame {}; predicting HOLD", event.decision_frame);
    }
    Ok(if o > h { PauseOutcome::Shift } else { PauseOutcome::Hold })
}

/// Mean of all outputs of the speaker's own perspective at the prediction frame.
pub fn onset_score(track: &PredictionTrack, event: &OnsetEvent) -> Result<f64> {
    Ok(mean(track.at(event.speaker.index(), event.prediction_frame())?))
}

pub fn classify_onset(score: f64, threshold: f64) -> OnsetClass {
    if score >= threshold {
        OnsetClass::Long
    } else {
        OnsetClass::Short
    }
}

pub fn score_onset(track: &PredictionTrack, event: &OnsetEvent, threshold: f64) -> Result<OnsetClass> {
    onset_score(track, event).map(|s| classify_onset(s, threshold))
}

/// Candidate thresholds 0.00, 0.01, ..., 1.00.
pub fn threshold_grid() -> impl Iterator<Item = f64> {
    (0..=100).map(|k| k as f64 / 100.0)
}

/// Grid threshold with the best weighted F1; the lowest wins ties.
pub fn select_onset_threshold(scores: &[f64], truth: &[OnsetClass]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::Dimension {
            context: "onset scores".into(),
            expected: truth.len(),
            got: scores.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::Data("no onset events to tune a threshold on".into()));
    }
    let mut best = (f64::NEG_INFINITY, 0.0);
    for th in threshold_grid() {
        let pred: Vec<OnsetClass> = scores.iter().map(|&s| classify_onset(s, th)).collect();
        let f = fscore(truth, &pred)?.weighted_f1;
        if f > best.0 {
            best = (f, th);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Speaker;

    fn flat(a: f64, b: f64, n: usize) -> PredictionTrack {
        PredictionTrack::new(vec![vec![a; HORIZON]; n], vec![vec![b; HORIZON]; n]).unwrap()
    }

    fn pause(holder: Speaker) -> PauseEvent {
        PauseEvent {
            decision_frame: 3,
            holder,
            continuer: holder,
        }
    }

    fn onset() -> OnsetEvent {
        OnsetEvent {
            speaker: Speaker::A,
            start_frame: 0,
            length_frames: 60,
            class: OnsetClass::Long,
        }
    }

    #[test]
    fn confident_holder_wins() {
        assert_eq!(score_pause(&flat(0.9, 0.1, 5), &pause(Speaker::A)).unwrap(), PauseOutcome::Hold);
        assert_eq!(score_pause(&flat(0.9, 0.1, 5), &pause(Speaker::B)).unwrap(), PauseOutcome::Shift);
        assert_eq!(score_pause(&flat(0.4, 0.4, 5), &pause(Speaker::B)).unwrap(), PauseOutcome::Hold);
    }

    #[test]
    fn only_the_first_second_counts() {
        let mut a = vec![0.0; HORIZON];
        let mut b = vec![0.0; HORIZON];
        // A: 0.5 for 20 frames, then 1.0; B: 0.6 for 20 frames, then 0.0
        a[..20].fill(0.5);
        a[20..].fill(1.0);
        b[..20].fill(0.6);
        let track = PredictionTrack::new(vec![a; 4], vec![b; 4]).unwrap();
        assert_eq!(score_pause(&track, &pause(Speaker::A)).unwrap(), PauseOutcome::Shift);
    }

    #[test]
    fn out_of_range_frame_is_an_error() {
        assert!(score_pause(&flat(0.5, 0.5, 2), &pause(Speaker::A)).is_err());
        assert!(score_onset(&flat(0.5, 0.5, 5), &onset(), 0.5).is_err());
    }

    #[test]
    fn onset_threshold_boundary() {
        let t = flat(1.0, 0.0, 20);
        assert_eq!(score_onset(&t, &onset(), 1.0).unwrap(), OnsetClass::Long);
        let z = flat(1e-7, 0.0, 20);
        assert_eq!(score_onset(&z, &onset(), 0.01).unwrap(), OnsetClass::Short);
        assert_eq!(classify_onset(0.25, 0.25), OnsetClass::Long);
    }

    #[test]
    fn threshold_lands_at_bottom_of_gap() {
        let scores = [0.1, 0.2, 0.305, 0.62, 0.9];
        let truth = [OnsetClass::Short, OnsetClass::Short, OnsetClass::Short, OnsetClass::Long, OnsetClass::Long];
        assert_eq!(select_onset_threshold(&scores, &truth).unwrap(), 0.31);
        // single event: every threshold under its score is perfect
        assert_eq!(select_onset_threshold(&[0.4], &[OnsetClass::Long]).unwrap(), 0.0);
        assert_eq!(select_onset_threshold(&[0.4], &[OnsetClass::Short]).unwrap(), 0.41);
    }

    #[test]
    fn mismatched_perspectives_are_rejected() {
        assert!(PredictionTrack::new(vec![vec![0.5; HORIZON]; 2], vec![vec![0.5; HORIZON]; 3]).is_err());
        assert!(PredictionTrack::new(vec![vec![0.5; 3]], vec![vec![0.5; 3]]).is_err());
    }
}
