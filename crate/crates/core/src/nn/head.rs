use rand::Rng;

use super::lstm::fan_in_bound;
use super::matrix::{sigmoid, Matrix};
use super::Parameters;
use crate::error::{check_dim, Result};

/// Number of future 50ms frames predicted at every step (3 seconds).
pub const HORIZON: usize = 60;

/// Linear layer followed by an element-wise sigmoid, one output per future frame.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseSigmoidParams {
    /// `HORIZON x in_dim`
    pub w: Matrix,
    /// `HORIZON x 1`
    pub b: Matrix,
}

impl DenseSigmoidParams {
    pub fn new<R: Rng + ?Sized>(in_dim: usize, rng: &mut R) -> Self {
        Self {
            w: Matrix::uniform(HORIZON, in_dim, fan_in_bound(in_dim), rng),
            b: Matrix::zeros(HORIZON, 1),
        }
    }

    pub fn zeros(in_dim: usize) -> Self {
        Self {
            w: Matrix::zeros(HORIZON, in_dim),
            b: Matrix::zeros(HORIZON, 1),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn logits(&self, h: &[f64]) -> Result<Vec<f64>> {
        check_dim("output head input", self.in_dim(), h.len())?;
        let mut z = self.b.as_slice().to_vec();
        self.w.matvec_acc(h, &mut z);
        Ok(z)
    }

    pub fn forward(&self, h: &[f64]) -> Result<Vec<f64>> {
        Ok(self.logits(h)?.into_iter().map(sigmoid).collect())
    }

    /// Accumulates parameter gradients for `∂L/∂logits` and returns `∂L/∂h`.
    pub fn backward(&self, h: &[f64], grad_logits: &[f64], grads: &mut DenseSigmoidParams) -> Vec<f64> {
        grads.w.add_outer(grad_logits, h);
        for (gb, d) in grads.b.as_mut_slice().iter_mut().zip(grad_logits) {
            *gb += d;
        }
        let mut dh = vec![0.0; self.in_dim()];
        self.w.matvec_t_acc(grad_logits, &mut dh);
        dh
    }
}

impl Parameters for DenseSigmoidParams {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        vec![("w".to_string(), &self.w), ("b".to_string(), &self.b)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.w, &mut self.b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_head_outputs_one_half() {
        let head = DenseSigmoidParams::zeros(7);
        let y = head.forward(&[1.0; 7]).unwrap();
        assert_eq!(y.len(), HORIZON);
        assert!(y.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn output_monotone_in_bias() {
        let mut head = DenseSigmoidParams::zeros(2);
        let mut last = 0.0;
        for bias in [-5.0, 0.0, 5.0, 20.0, 35.0] {
            head.b.set(3, 0, bias);
            let y = head.forward(&[0.1, 0.2]).unwrap()[3];
            assert!(y > last && y <= 1.0);
            last = y;
        }
        assert!(last > 1.0 - 1e-12);
    }

    #[test]
    fn matches_slow_path_and_stays_in_open_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let head = DenseSigmoidParams::new(5, &mut rng);
        let h = [0.3, -0.7, 0.9, 0.0, -0.1];
        let y = head.forward(&h).unwrap();
        for j in 0..HORIZON {
            let mut z = head.b.get(j, 0);
            for k in 0..5 {
                z += head.w.get(j, k) * h[k];
            }
            let expected = 1.0 / (1.0 + (-z).exp());
            assert!((y[j] - expected).abs() < 1e-12);
            assert!(y[j] > 0.0 && y[j] < 1.0);
        }
    }

    #[test]
    fn wrong_input_dim_is_error() {
        assert!(DenseSigmoidParams::zeros(3).forward(&[1.0]).is_err());
    }
}
