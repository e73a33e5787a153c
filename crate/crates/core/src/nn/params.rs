use super::Matrix;

/// A fixed collection of named trainable tensors.
///
/// Gradient stores, optimizer moments and finite-difference estimates are all
/// values of the same type as the parameters they describe, so shapes line up
/// by construction.
pub trait Parameters: Clone {
    fn tensors(&self) -> Vec<(String, &Matrix)>;

    /// Same order as [`Parameters::tensors`].
    fn tensors_mut(&mut self) -> Vec<&mut Matrix>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill_zero();
        z
    }

    fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.as_slice().len()).sum()
    }

    /// `self += alpha * other`
    fn add_scaled(&mut self, other: &Self, alpha: f64) {
        let src: Vec<&Matrix> = other.tensors().into_iter().map(|(_, t)| t).collect();
        for (dst, src) in self.tensors_mut().into_iter().zip(src) {
            dst.add_scaled(src, alpha);
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.is_finite())
    }
}
