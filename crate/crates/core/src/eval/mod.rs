//! Turn-taking decision metrics over prediction tracks.

mod dump;
mod events;
mod fscore;
mod score;
mod ttest;

pub use dump::{read_predictions, write_predictions};
pub use events::{
    find_onsets, find_pauses, pause_candidates, Labels, OnsetClass, OnsetEvent, PauseCandidate, PauseEvent,
    PauseOutcome, CONTINUATION_FRAMES, LONG_MIN_FRAMES, ONSET_OFFSET_FRAMES, ONSET_SILENCE_FRAMES,
    SHORT_MAX_FRAMES, SHORT_SILENCE_AFTER_FRAMES,
};
pub use fscore::{fscore, majority_baseline, majority_class, ClassScore, FScoreReport};
pub use score::{
    classify_onset, onset_score, score_onset, score_pause, select_onset_threshold, threshold_grid, PredictionTrack,
};
pub use ttest::{ttest_two_tailed, TTest};
