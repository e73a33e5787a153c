//! Dense numerical building blocks: matrices, the LSTM cell, the embedding
//! table, the sigmoid output head, loss, optimizer, dropout and the
//! finite-difference gradient oracle.

pub mod adam;
pub mod dropout;
pub mod embedding;
pub mod gradcheck;
pub mod head;
pub mod loss;
pub mod lstm;
pub mod matrix;
mod params;

pub use adam::{AdamConfig, AdamState};
pub use dropout::dropout_mask;
pub use embedding::{EmbeddingTable, OOV_INDEX};
pub use gradcheck::{finite_diff_grad, max_relative_error, relative_error};
pub use head::{DenseSigmoidParams, HORIZON};
pub use loss::{bce_loss, BceOutput, BCE_CLAMP};
pub use lstm::{LstmCache, LstmParams, LstmState};
pub use matrix::Matrix;
pub use params::Parameters;
