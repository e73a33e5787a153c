use std::fmt;

use crate::corpus::Speaker;

/// Frames after a pause decision in which the next speaker must appear (1s).
pub const CONTINUATION_FRAMES: usize = 20;
/// Silence a speaker must keep before an onset counts (1.5s).
pub const ONSET_SILENCE_FRAMES: usize = 30;
/// Longest SHORT utterance (1s).
pub const SHORT_MAX_FRAMES: usize = 20;
/// Silence that must follow a SHORT utterance (5s).
pub const SHORT_SILENCE_AFTER_FRAMES: usize = 100;
/// Shortest LONG utterance (2.5s).
pub const LONG_MIN_FRAMES: usize = 50;
/// Onsets are judged this many frames (500ms) into the utterance.
pub const ONSET_OFFSET_FRAMES: usize = 10;

/// Per-speaker frame labels, indexed by [`Speaker::index`].
pub type Labels<'a> = [&'a [bool]; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PauseOutcome {
    Hold,
    Shift,
}

impl fmt::Display for PauseOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PauseOutcome::Hold => "HOLD",
            PauseOutcome::Shift => "SHIFT",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OnsetClass {
    Short,
    Long,
}

impl fmt::Display for OnsetClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OnsetClass::Short => "SHORT",
            OnsetClass::Long => "LONG",
        })
    }
}

/// A run of joint silence that directly follows speech by a single speaker.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PauseCandidate {
    pub start_frame: usize,
    pub holder: Speaker,
    /// Length of the silent run; runs cut off by the end of the labels are
    /// counted up to the end.
    pub silence_frames: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PauseEvent {
    pub decision_frame: usize,
    pub holder: Speaker,
    pub continuer: Speaker,
}

impl PauseEvent {
    pub fn truth(&self) -> PauseOutcome {
        if self.continuer == self.holder {
            PauseOutcome::Hold
        } else {
            PauseOutcome::Shift
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OnsetEvent {
    pub speaker: Speaker,
    pub start_frame: usize,
    pub length_frames: usize,
    pub class: OnsetClass,
}

impl OnsetEvent {
    pub fn prediction_frame(&self) -> usize {
        self.start_frame + ONSET_OFFSET_FRAMES
    }
}

fn frame_count(labels: Labels<'_>) -> usize {
    debug_assert_eq!(labels[0].len(), labels[1].len());
    labels[0].len().min(labels[1].len())
}

pub fn pause_candidates(labels: Labels<'_>) -> Vec<PauseCandidate> {
    let n = frame_count(labels);
    let silent = |k: usize| !labels[0][k] && !labels[1][k];
    let mut out = Vec::new();
    let mut k = 1;
    while k < n {
        if silent(k) && !silent(k - 1) {
            let start = k;
            while k < n && silent(k) {
                k += 1;
            }
            let holder = match (labels[0][start - 1], labels[1][start - 1]) {
                (true, false) => Some(Speaker::A),
                (false, true) => Some(Speaker::B),
                _ => None,
            };
            if let Some(holder) = holder {
                out.push(PauseCandidate {
                    start_frame: start,
                    holder,
                    silence_frames: k - start,
                });
            }
        } else {
            k += 1;
        }
    }
    out
}

/// Pauses of at least `min_frames` after which exactly one speaker starts
/// within [`CONTINUATION_FRAMES`]. The decision frame is the last frame of the
/// minimum silence.
pub fn find_pauses(labels: Labels<'_>, min_frames: usize) -> Vec<PauseEvent> {
    assert!(min_frames > 0, "pause length must be positive");
    let n = frame_count(labels);
    pause_candidates(labels)
        .into_iter()
        .filter(|c| c.silence_frames >= min_frames)
        .filter_map(|c| {
            let decision = c.start_frame + min_frames - 1;
            let window = decision + 1..decision + 1 + CONTINUATION_FRAMES;
            if window.end > n {
                return None;
            }
            let starts = |sp: Speaker| labels[sp.index()][window.clone()].iter().any(|&b| b);
            match (starts(Speaker::A), starts(Speaker::B)) {
                (true, false) => Some(Speaker::A),
                (false, true) => Some(Speaker::B),
                _ => None,
            }
            .map(|continuer| PauseEvent {
                decision_frame: decision,
                holder: c.holder,
                continuer,
            })
        })
        .collect()
}

/// Classifiable utterance onsets of both speakers, ordered by speaker then
/// frame. Only utterances of at least [`ONSET_OFFSET_FRAMES`] are returned.
pub fn find_onsets(labels: Labels<'_>) -> Vec<OnsetEvent> {
    let n = frame_count(labels);
    let mut out = Vec::new();
    for speaker in Speaker::BOTH {
        let l = &labels[speaker.index()][..n];
        let mut k = ONSET_SILENCE_FRAMES;
        while k < n {
            if !(l[k] && l[k - ONSET_SILENCE_FRAMES..k].iter().all(|&b| !b)) {
                k += 1;
                continue;
            }
            let start = k;
            while k < n && l[k] {
                k += 1;
            }
            let length = k - start;
            let reaches_end = k == n;
            let class = if length >= LONG_MIN_FRAMES {
                Some(OnsetClass::Long)
            } else if !reaches_end
                && length <= SHORT_MAX_FRAMES
                && k + SHORT_SILENCE_AFTER_FRAMES <= n
                && l[k..k + SHORT_SILENCE_AFTER_FRAMES].iter().all(|&b| !b)
            {
                Some(OnsetClass::Short)
            } else {
                None
            };
            if let Some(class) = class.filter(|_| length >= ONSET_OFFSET_FRAMES) {
                out.push(OnsetEvent {
                    speaker,
                    start_frame: start,
                    length_frames: length,
                    class,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(spans: &[(usize, usize)], n: usize) -> Vec<bool> {
        let mut v = vec![false; n];
        for &(a, b) in spans {
            v[a..b].fill(true);
        }
        v
    }

    #[test]
    fn hold_after_600ms_pause() {
        // A speaks [0, 1.0s), silent until 1.6s, then resumes
        let a = frames(&[(0, 20), (32, 60)], 80);
        let b = vec![false; 80];
        let ev = find_pauses([&a, &b], 10);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].decision_frame, 29);
        assert_eq!(ev[0].truth(), PauseOutcome::Hold);
        let short = find_pauses([&a, &b], 1);
        assert_eq!(short[0].decision_frame, 20);
    }

    #[test]
    fn shift_and_double_continuation() {
        let a = frames(&[(0, 20)], 80);
        let b = frames(&[(25, 60)], 80);
        assert_eq!(find_pauses([&a, &b], 1)[0].truth(), PauseOutcome::Shift);
        let a2 = frames(&[(0, 20), (26, 40)], 80);
        assert!(find_pauses([&a2, &b], 1).is_empty());
    }

    #[test]
    fn no_silence_means_no_pauses() {
        let a = vec![true; 50];
        let b = vec![false; 50];
        assert!(find_pauses([&a, &b], 1).is_empty());
    }

    #[test]
    fn overlapped_speech_before_silence_is_not_a_pause() {
        let a = frames(&[(0, 20)], 80);
        let b = frames(&[(10, 20), (30, 40)], 80);
        assert!(pause_candidates([&a, &b]).iter().all(|c| c.start_frame != 20));
        assert_eq!(pause_candidates([&a, &b]).len(), 1);
    }

    #[test]
    fn onset_classes() {
        let silent = vec![false; 400];
        // 2s silence, 0.8s speech, 6s silence
        let short = frames(&[(40, 56)], 400);
        let ev = find_onsets([&short, &silent]);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].class, OnsetClass::Short);
        assert_eq!(ev[0].prediction_frame(), 50);
        // 3s speech
        let long = frames(&[(40, 100)], 400);
        assert_eq!(find_onsets([&silent, &long])[0].class, OnsetClass::Long);
        assert_eq!(find_onsets([&silent, &long])[0].speaker, Speaker::B);
        // 1.7s speech is neither
        let mid = frames(&[(40, 74)], 400);
        assert!(find_onsets([&mid, &silent]).is_empty());
        // too short to score
        let tiny = frames(&[(40, 45)], 400);
        assert!(find_onsets([&tiny, &silent]).is_empty());
        // only 1s of prior silence
        let early = frames(&[(0, 10), (30, 90)], 400);
        assert_eq!(find_onsets([&early, &silent]).len(), 0);
    }
}
