//! Sub-network recurrent cells on independent clocks, sampled by a master
//! cell at the 50ms prediction rate.

pub mod checkpoint;
pub mod config;
pub mod gradcheck;
pub mod network;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{
    Arrangement, EmbeddingConfig, Group, InputKind, ModalityConfig, NetworkConfig, Timescale,
    HIDDEN_BUDGET, MASTER_PERIOD_MS,
};
pub use network::{
    backward_sequence, derived_rng, master_step, run_segment, run_sequence, track_bce, FrameTarget, GradStore,
    Interval, MultiscaleState, NetworkParams, Payload, RunMode, SequenceInputs, StepCache,
    TimedInput,
};
pub use train::{evaluate_bce, train, TrainConfig, TrainReport, TrainSequence, DEFAULT_T_BPTT};
