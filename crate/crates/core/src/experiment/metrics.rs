use std::path::Path;

use crate::corpus::{frame_targets, Dataset, Speaker};
use crate::error::{Error, Result};
use crate::eval::{
    find_onsets, find_pauses, fscore, majority_baseline, onset_score, read_predictions, score_pause,
    select_onset_threshold, write_predictions, OnsetClass, PauseOutcome, PredictionTrack,
};
use crate::multiscale::{run_sequence, track_bce, NetworkConfig, NetworkParams, RunMode};
use crate::par::{self, Execution};

/// Onset threshold used when no held-out onsets are available.
pub const FALLBACK_ONSET_THRESHOLD: f64 = 0.5;

/// Both perspectives of one conversation.
#[derive(Clone, Debug, PartialEq)]
pub struct ConversationPrediction {
    pub id: String,
    pub labels: [Vec<bool>; 2],
    pub track: PredictionTrack,
}

/// Runs the model over every frame of every conversation in `dataset`.
pub fn predict(
    params: &NetworkParams,
    config: &NetworkConfig,
    dataset: &Dataset,
    exec: Execution,
) -> Result<Vec<ConversationPrediction>> {
    let tracks = par::map(exec, &dataset.items, |item| {
        run_sequence(params, config, &item.sequence.inputs, item.n_frames, &mut RunMode::Eval).map(|(t, _)| t)
    });
    let mut out = Vec::with_capacity(dataset.items.len() / 2);
    let mut iter = dataset.items.iter().zip(tracks);
    while let Some((first, t_first)) = iter.next() {
        let (second, t_second) = iter
            .next()
            .ok_or_else(|| Error::Data(format!("{}: missing second perspective", first.conversation)))?;
        if first.speaker != Speaker::A || second.speaker != Speaker::B || first.conversation != second.conversation {
            return Err(Error::Data(format!("{}: perspectives out of order", first.conversation)));
        }
        out.push(ConversationPrediction {
            id: first.conversation.clone(),
            labels: [first.labels.clone(), second.labels.clone()],
            track: PredictionTrack::new(t_first?, t_second?)?,
        });
    }
    Ok(out)
}

/// Decision metrics of a set of predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub bce: f64,
    pub f1_pause: [f64; 2],
    pub f1_onset: f64,
    pub n_pause: [usize; 2],
    pub n_onset: usize,
}

/// Majority-vote F-scores on the same events.
#[derive(Clone, Debug, PartialEq)]
pub struct Baselines {
    pub f1_pause: [f64; 2],
    pub f1_onset: f64,
}

fn weighted_f1<C: Ord + Copy>(truth: &[C], pred: &[C], what: &str) -> Result<f64> {
    if truth.is_empty() {
        log::warn!("no {what} events; reporting NaN");
        return Ok(f64::NAN);
    }
    Ok(fscore(truth, pred)?.weighted_f1)
}

fn baseline_f1<C: Ord + Copy>(truth: &[C]) -> Result<f64> {
    if truth.is_empty() {
        return Ok(f64::NAN);
    }
    Ok(majority_baseline(truth)?.weighted_f1)
}

/// Onset scores and true classes over all conversations.
pub fn onset_scores(preds: &[ConversationPrediction]) -> Result<(Vec<f64>, Vec<OnsetClass>)> {
    let mut scores = Vec::new();
    let mut truth = Vec::new();
    for p in preds {
        for e in find_onsets([&p.labels[0], &p.labels[1]]) {
            if e.prediction_frame() < p.track.len() {
                scores.push(onset_score(&p.track, &e)?);
                truth.push(e.class);
            }
        }
    }
    Ok((scores, truth))
}

pub fn tune_onset_threshold(preds: &[ConversationPrediction]) -> Result<f64> {
    let (scores, truth) = onset_scores(preds)?;
    if scores.is_empty() {
        log::warn!("no held-out onsets; using threshold {FALLBACK_ONSET_THRESHOLD}");
        return Ok(FALLBACK_ONSET_THRESHOLD);
    }
    select_onset_threshold(&scores, &truth)
}

pub fn score_predictions(
    preds: &[ConversationPrediction],
    pause_frames: [usize; 2],
    threshold: f64,
) -> Result<(Metrics, Baselines)> {
    let mut loss = 0.0;
    let mut frames = 0usize;
    let mut pause_truth: [Vec<PauseOutcome>; 2] = [Vec::new(), Vec::new()];
    let mut pause_pred: [Vec<PauseOutcome>; 2] = [Vec::new(), Vec::new()];
    for p in preds {
        for sp in Speaker::BOTH {
            let targets = frame_targets(&p.labels[sp.index()]);
            let track = &p.track.probs[sp.index()];
            if track.len() < targets.len() {
                return Err(Error::Data(format!("{}: track shorter than its targets", p.id)));
            }
            loss += track_bce(&track[..targets.len()], &targets)? * targets.len() as f64;
            frames += targets.len();
        }
        for (k, &min) in pause_frames.iter().enumerate() {
            for e in find_pauses([&p.labels[0], &p.labels[1]], min) {
                pause_truth[k].push(e.truth());
                pause_pred[k].push(score_pause(&p.track, &e)?);
            }
        }
    }
    if frames == 0 {
        return Err(Error::Data("no scorable frames".into()));
    }
    let (scores, onset_truth) = onset_scores(preds)?;
    let onset_pred: Vec<OnsetClass> = scores.iter().map(|&s| crate::eval::classify_onset(s, threshold)).collect();
    let metrics = Metrics {
        bce: loss / frames as f64,
        f1_pause: [
            weighted_f1(&pause_truth[0], &pause_pred[0], "short pause")?,
            weighted_f1(&pause_truth[1], &pause_pred[1], "long pause")?,
        ],
        f1_onset: weighted_f1(&onset_truth, &onset_pred, "onset")?,
        n_pause: [pause_truth[0].len(), pause_truth[1].len()],
        n_onset: onset_truth.len(),
    };
    let baselines = Baselines {
        f1_pause: [baseline_f1(&pause_truth[0])?, baseline_f1(&pause_truth[1])?],
        f1_onset: baseline_f1(&onset_truth)?,
    };
    Ok((metrics, baselines))
}

/// Writes `<dir>/<conversation>.csv` for every prediction.
pub fn dump_predictions(dir: &Path, preds: &[ConversationPrediction]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for p in preds {
        write_predictions(&dir.join(format!("{}.csv", p.id)), &p.track)?;
    }
    Ok(())
}

/// Reloads dumped tracks for conversations whose labels are given.
pub fn load_dumped(dir: &Path, labels: &[(String, [Vec<bool>; 2])]) -> Result<Vec<ConversationPrediction>> {
    labels
        .iter()
        .map(|(id, l)| {
            Ok(ConversationPrediction {
                id: id.clone(),
                labels: l.clone(),
                track: read_predictions(&dir.join(format!("{id}.csv")))?,
            })
        })
        .collect()
}
