//! Conversation data: annotations, feature streams, model inputs and targets.

mod dataset;
mod io;
mod linguistic;
mod normalize;
mod synth;
mod targets;
mod types;

pub use dataset::{build_dataset, Dataset, DatasetItem, ModalityShape, ModalitySource, ModalitySpec};
pub use io::{
    load_conversation, load_vocabulary, parse_key_values, render_key_values, write_conversation, write_vocabulary,
    ACTIVITY_FILE, CONVERSATION_FILE, WORDS_FILE,
};
pub use linguistic::{linguistic_events, LinguisticMode, DEFAULT_WORD_DELAY_MS};
pub use normalize::{resample_mean, zscore_normalize};
pub use synth::{
    synth_generate, synth_generate_with_turns, GenConfig, Turn, ACOUSTIC_DIM, ACOUSTIC_MODALITY, BACKCHANNEL_WORD,
    GAZE_DIM, GAZE_MODALITY, TURN_FINAL_WORD,
};
pub use targets::{frame_labels, frame_targets, n_frames};
pub use types::{infer_rate_ms, Conversation, FeatureStream, Span, SpeechActivity, Speaker, Vocabulary, WordToken, OOV_WORD};
