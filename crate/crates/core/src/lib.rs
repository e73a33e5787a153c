//! Multiscale recurrent continuous turn-taking prediction.
//!
//! Per-modality recurrent sub-networks run on their own clocks (10ms frames,
//! 50ms frames, or irregular word events) and are sampled every 50ms by a
//! master LSTM, whose sigmoid head predicts the target speaker's voice
//! activity over the next 60 frames. The crate also carries the data
//! pipeline, training loop, pause/onset decision metrics and the experiment
//! CLI.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod multiscale;
pub mod nn;
pub mod par;

pub use error::{Error, Result};

/// Master clock period in seconds.
pub const FRAME_SECONDS: f64 = 0.05;
