use super::types::{SpeechActivity, Speaker};
use crate::multiscale::FrameTarget;
use crate::nn::HORIZON;
use crate::FRAME_SECONDS;

/// Number of whole 50ms frames in `duration_s`.
pub fn n_frames(duration_s: f64) -> usize {
    (duration_s / FRAME_SECONDS + 1e-9).floor() as usize
}

/// Frame `k` covers `[k·50ms, (k+1)·50ms)` and is active when the speaker
/// talks for at least half of it.
pub fn frame_labels(activity: &SpeechActivity, speaker: Speaker, n_frames: usize) -> Vec<bool> {
    let mut covered = vec![0.0; n_frames];
    for span in activity.spans(speaker) {
        let first = (span.start_s / FRAME_SECONDS).floor().max(0.0) as usize;
        let last = ((span.end_s / FRAME_SECONDS).ceil() as usize).min(n_frames);
        for (k, c) in covered.iter_mut().enumerate().take(last).skip(first) {
            let lo = k as f64 * FRAME_SECONDS;
            *c += span.overlap(lo, lo + FRAME_SECONDS);
        }
    }
    covered
        .into_iter()
        .map(|c| c >= 0.5 * FRAME_SECONDS - 1e-9)
        .collect()
}

/// Target at frame `t` is the labels of frames `t+1 ..= t+HORIZON`; frames
/// whose window runs past the end are left out.
pub fn frame_targets(labels: &[bool]) -> Vec<FrameTarget> {
    let valid = labels.len().saturating_sub(HORIZON);
    (0..valid)
        .map(|t| std::array::from_fn(|j| labels[t + 1 + j]))
        .collect()
}
