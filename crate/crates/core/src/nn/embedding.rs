use rand::Rng;

use super::{Matrix, Parameters};
use crate::error::{Error, Result};

/// Index 0 is reserved for out-of-vocabulary tokens.
pub const OOV_INDEX: usize = 0;

/// Jointly trained linear word embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub table: Matrix,
}

impl EmbeddingTable {
    pub fn new<R: Rng + ?Sized>(vocab_size: usize, dim: usize, rng: &mut R) -> Result<Self> {
        if dim == 0 || vocab_size == 0 {
            return Err(Error::Config(format!(
                "embedding needs positive size, got {vocab_size}x{dim}"
            )));
        }
        Ok(Self {
            table: Matrix::uniform(vocab_size, dim, 1.0 / (dim as f64).sqrt(), rng),
        })
    }

    pub fn zeros(vocab_size: usize, dim: usize) -> Self {
        Self {
            table: Matrix::zeros(vocab_size, dim),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.table.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn lookup(&self, index: usize) -> Result<&[f64]> {
        if index >= self.vocab_size() {
            return Err(Error::Data(format!(
                "token index {index} out of range for vocabulary of {}",
                self.vocab_size()
            )));
        }
        Ok(self.table.row(index))
    }

    /// Adds `grad` into row `index` of a gradient table.
    pub fn accumulate(grads: &mut EmbeddingTable, index: usize, grad: &[f64]) -> Result<()> {
        if index >= grads.vocab_size() {
            return Err(Error::Data(format!("token index {index} out of range")));
        }
        super::matrix::axpy(1.0, grad, grads.table.row_mut(index));
        Ok(())
    }
}

impl Parameters for EmbeddingTable {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        vec![("table".to_string(), &self.table)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.table]
    }
}
