//! Experiment orchestration behind the command-line interface.

mod commands;
mod config;
mod metrics;
mod table;

pub use commands::*;
pub use config::{
    CorpusSection, EvalSection, ExperimentConfig, GridSection, ModalityEntry, NetworkSection, TrainingSection,
};
pub use metrics::{
    dump_predictions, load_dumped, onset_scores, predict, score_predictions, tune_onset_threshold, Baselines,
    ConversationPrediction, Metrics, FALLBACK_ONSET_THRESHOLD,
};
pub use table::Table;
