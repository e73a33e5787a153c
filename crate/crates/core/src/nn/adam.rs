use super::Parameters;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments shaped like the parameters they update.
#[derive(Clone, Debug)]
pub struct AdamState<P: Parameters> {
    pub config: AdamConfig,
    pub first: P,
    pub second: P,
    pub step: u64,
}

impl<P: Parameters> AdamState<P> {
    pub fn new(params: &P, config: AdamConfig) -> Self {
        Self {
            config,
            first: params.zeros_like(),
            second: params.zeros_like(),
            step: 0,
        }
    }

    /// One update with `l2_lambda * θ` added to every gradient entry.
    pub fn step(&mut self, params: &mut P, grads: &P, l2_lambda: f64) {
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let bias1 = 1.0 - beta1.powi(self.step as i32);
        let bias2 = 1.0 - beta2.powi(self.step as i32);

        let grads: Vec<_> = grads.tensors().into_iter().map(|(_, t)| t).collect();
        let moments = self.first.tensors_mut().into_iter().zip(self.second.tensors_mut());
        for ((theta, g), (m, v)) in params.tensors_mut().into_iter().zip(grads).zip(moments) {
            let theta = theta.as_mut_slice();
            let (m, v) = (m.as_mut_slice(), v.as_mut_slice());
            for k in 0..theta.len() {
                let gk = g.as_slice()[k] + l2_lambda * theta[k];
                m[k] = beta1 * m[k] + (1.0 - beta1) * gk;
                v[k] = beta2 * v[k] + (1.0 - beta2) * gk * gk;
                let m_hat = m[k] / bias1;
                let v_hat = v[k] / bias2;
                theta[k] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Matrix;

    #[derive(Clone, Debug)]
    struct Scalar(Matrix);

    impl Parameters for Scalar {
        fn tensors(&self) -> Vec<(String, &Matrix)> {
            vec![("theta".into(), &self.0)]
        }
        fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
            vec![&mut self.0]
        }
    }

    fn scalar(v: f64) -> Scalar {
        Scalar(Matrix::from_vec(1, 1, vec![v]).unwrap())
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = scalar(0.75);
        let mut adam = AdamState::new(&p, AdamConfig::default());
        for _ in 0..10 {
            adam.step(&mut p, &scalar(0.0), 0.0);
        }
        assert_eq!(p.0.get(0, 0), 0.75);
    }

    #[test]
    fn one_step_descends_quadratic() {
        let mut p = scalar(1.0);
        let mut adam = AdamState::new(&p, AdamConfig::default());
        let g = scalar(p.0.get(0, 0));
        adam.step(&mut p, &g, 0.0);
        assert!(p.0.get(0, 0) < 1.0 && p.0.get(0, 0) > 0.0);
    }

    /// Plain scalar re-derivation of the Adam recursion for f(θ) = θ²/2.
    fn reference_adam(theta0: f64, lr: f64, steps: usize) -> f64 {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut theta, mut m, mut v) = (theta0, 0.0, 0.0);
        for t in 1..=steps {
            let g = theta;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32));
            let vh = v / (1.0 - b2.powi(t as i32));
            theta -= lr * mh / (vh.sqrt() + eps);
        }
        theta
    }

    #[test]
    fn quadratic_converges_like_scalar_simulation() {
        let config = AdamConfig {
            learning_rate: 1e-2,
            ..AdamConfig::default()
        };
        let mut p = scalar(1.0);
        let mut adam = AdamState::new(&p, config);
        for _ in 0..500 {
            let g = scalar(p.0.get(0, 0));
            adam.step(&mut p, &g, 0.0);
        }
        let theta = p.0.get(0, 0);
        assert_eq!(theta, reference_adam(1.0, 1e-2, 500));
        assert!(theta.abs() < 1e-3, "theta = {theta}");
    }

    #[test]
    fn l2_term_shrinks_without_data_gradient() {
        let mut p = scalar(2.0);
        let mut adam = AdamState::new(&p, AdamConfig::default());
        adam.step(&mut p, &scalar(0.0), 0.1);
        assert!(p.0.get(0, 0) < 2.0);
    }
}
