//! Standard LSTM cell (no peepholes) with an analytic backward pass.
//!
//! Gate pre-activations are stacked as `[input, forget, candidate, output]`,
//! each slice `hidden_dim` long:
//!
//! ```text
//! z  = W x + U h + b
//! i  = σ(z_i)   f = σ(z_f)   g = tanh(z_g)   o = σ(z_o)
//! c' = f ⊙ c + i ⊙ g
//! h' = o ⊙ tanh(c')
//! ```

use rand::Rng;

use super::matrix::{sigmoid, Matrix};
use super::params::Parameters;
use crate::error::{check_dim, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `4H x input_dim`
    pub w: Matrix,
    /// `4H x H`
    pub u: Matrix,
    /// `4H x 1`
    pub b: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            h: vec![0.0; hidden_dim],
            c: vec![0.0; hidden_dim],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().chain(&self.c).all(|v| v.is_finite())
    }
}

/// Intermediates of one forward step, consumed by [`LstmParams::backward`].
#[derive(Clone, Debug)]
pub struct LstmCache {
    input_dim: usize,
    hidden_dim: usize,
    pub x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates `[i, f, g, o]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmParams {
    /// Weights uniform in `±1/sqrt(fan_in)`, forget-gate bias 1, other biases 0.
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let w = Matrix::uniform(4 * hidden_dim, input_dim, fan_in_bound(input_dim), rng);
        let u = Matrix::uniform(4 * hidden_dim, hidden_dim, fan_in_bound(hidden_dim), rng);
        let mut b = Matrix::zeros(4 * hidden_dim, 1);
        for j in hidden_dim..2 * hidden_dim {
            b.set(j, 0, 1.0);
        }
        Self {
            input_dim,
            hidden_dim,
            w,
            u,
            b,
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            w: Matrix::zeros(4 * hidden_dim, input_dim),
            u: Matrix::zeros(4 * hidden_dim, hidden_dim),
            b: Matrix::zeros(4 * hidden_dim, 1),
        }
    }

    pub fn forward(&self, x: &[f64], state: &LstmState) -> Result<(LstmState, LstmCache)> {
        check_dim("lstm input", self.input_dim, x.len())?;
        check_dim("lstm hidden state", self.hidden_dim, state.h.len())?;
        check_dim("lstm cell state", self.hidden_dim, state.c.len())?;
        let hd = self.hidden_dim;

        let mut gates = self.b.as_slice().to_vec();
        self.w.matvec_acc(x, &mut gates);
        self.u.matvec_acc(&state.h, &mut gates);
        for (k, z) in gates.iter_mut().enumerate() {
            *z = if (2 * hd..3 * hd).contains(&k) {
                z.tanh()
            } else {
                sigmoid(*z)
            };
        }

        let mut c = vec![0.0; hd];
        let mut h = vec![0.0; hd];
        let mut tanh_c = vec![0.0; hd];
        for j in 0..hd {
            let (i, f, g, o) = (gates[j], gates[hd + j], gates[2 * hd + j], gates[3 * hd + j]);
            c[j] = f * state.c[j] + i * g;
            tanh_c[j] = c[j].tanh();
            h[j] = o * tanh_c[j];
        }

        let cache = LstmCache {
            input_dim: self.input_dim,
            hidden_dim: hd,
            x: x.to_vec(),
            h_prev: state.h.clone(),
            c_prev: state.c.clone(),
            gates,
            tanh_c,
        };
        Ok((LstmState { h, c }, cache))
    }

    /// Backpropagates `(∂L/∂h', ∂L/∂c')` through one step.
    ///
    /// Parameter gradients are accumulated into `grads`; returns `∂L/∂x` and
    /// `(∂L/∂h, ∂L/∂c)` for the previous state.
    pub fn backward(
        &self,
        cache: &LstmCache,
        grad_h: &[f64],
        grad_c: &[f64],
        grads: &mut LstmParams,
    ) -> Result<(Vec<f64>, LstmState)> {
        if cache.input_dim != self.input_dim || cache.hidden_dim != self.hidden_dim {
            return Err(Error::Config(format!(
                "lstm cache shaped {}x{} does not match cell {}x{}",
                cache.input_dim, cache.hidden_dim, self.input_dim, self.hidden_dim
            )));
        }
        check_dim("lstm grad_h", self.hidden_dim, grad_h.len())?;
        check_dim("lstm grad_c", self.hidden_dim, grad_c.len())?;
        check_dim("lstm grads input", self.input_dim, grads.input_dim)?;
        check_dim("lstm grads hidden", self.hidden_dim, grads.hidden_dim)?;

        let hd = self.hidden_dim;
        let g = &cache.gates;
        let mut dz = vec![0.0; 4 * hd];
        let mut dc_prev = vec![0.0; hd];
        for j in 0..hd {
            let (i, f, cand, o) = (g[j], g[hd + j], g[2 * hd + j], g[3 * hd + j]);
            let tc = cache.tanh_c[j];
            let dc = grad_c[j] + grad_h[j] * o * (1.0 - tc * tc);
            let d_o = grad_h[j] * tc;
            let d_i = dc * cand;
            let d_g = dc * i;
            let d_f = dc * cache.c_prev[j];
            dc_prev[j] = dc * f;
            dz[j] = d_i * i * (1.0 - i);
            dz[hd + j] = d_f * f * (1.0 - f);
            dz[2 * hd + j] = d_g * (1.0 - cand * cand);
            dz[3 * hd + j] = d_o * o * (1.0 - o);
        }

        grads.w.add_outer(&dz, &cache.x);
        grads.u.add_outer(&dz, &cache.h_prev);
        for (gb, d) in grads.b.as_mut_slice().iter_mut().zip(&dz) {
            *gb += d;
        }

        let mut dx = vec![0.0; self.input_dim];
        self.w.matvec_t_acc(&dz, &mut dx);
        let mut dh_prev = vec![0.0; hd];
        self.u.matvec_t_acc(&dz, &mut dh_prev);
        Ok((
            dx,
            LstmState {
                h: dh_prev,
                c: dc_prev,
            },
        ))
    }
}

impl Parameters for LstmParams {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        vec![
            ("w".to_string(), &self.w),
            ("u".to_string(), &self.u),
            ("b".to_string(), &self.b),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.w, &mut self.u, &mut self.b]
    }
}

pub(crate) fn fan_in_bound(fan_in: usize) -> f64 {
    1.0 / (fan_in.max(1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{finite_diff_grad, max_relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Scalar-at-a-time cell written directly from the gate equations.
    fn slow_cell(p: &LstmParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hd = p.hidden_dim;
        let pre = |row: usize| -> f64 {
            let mut s = p.b.get(row, 0);
            for k in 0..p.input_dim {
                s += p.w.get(row, k) * x[k];
            }
            for k in 0..hd {
                s += p.u.get(row, k) * h[k];
            }
            s
        };
        let logistic = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h_new = Vec::new();
        let mut c_new = Vec::new();
        for j in 0..hd {
            let i = logistic(pre(j));
            let f = logistic(pre(hd + j));
            let g = pre(2 * hd + j).tanh();
            let o = logistic(pre(3 * hd + j));
            let cj = f * c[j] + i * g;
            c_new.push(cj);
            h_new.push(o * cj.tanh());
        }
        (h_new, c_new)
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-scale..scale)).collect()
    }

    #[test]
    fn zero_params_zero_cell_gives_zero_state() {
        let p = LstmParams::zeros(3, 4);
        let (s, _) = p.forward(&[1.0, -2.0, 5.0], &LstmState::zeros(4)).unwrap();
        assert!(s.h.iter().all(|&v| v == 0.0));
        assert!(s.c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_params_halve_the_cell() {
        let p = LstmParams::zeros(2, 3);
        let state = LstmState {
            h: vec![0.0; 3],
            c: vec![1.0, -4.0, 0.25],
        };
        let (s, _) = p.forward(&[3.0, 7.0], &state).unwrap();
        assert_eq!(s.c, vec![0.5, -2.0, 0.125]);
    }

    #[test]
    fn forget_bias_initialized_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = LstmParams::new(3, 5, &mut rng);
        for j in 0..20 {
            let expected = if (5..10).contains(&j) { 1.0 } else { 0.0 };
            assert_eq!(p.b.get(j, 0), expected);
        }
        let bound = 1.0 / 3f64.sqrt();
        assert!(p.w.as_slice().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn matches_slow_path_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = LstmParams::new(5, 6, &mut rng);
        let mut state = LstmState {
            h: random_vec(&mut rng, 6, 0.9),
            c: random_vec(&mut rng, 6, 2.0),
        };
        for _ in 0..5 {
            let x = random_vec(&mut rng, 5, 3.0);
            let (h_ref, c_ref) = slow_cell(&p, &x, &state.h, &state.c);
            let (next, _) = p.forward(&x, &state).unwrap();
            for j in 0..6 {
                assert!((next.h[j] - h_ref[j]).abs() < 1e-12);
                assert!((next.c[j] - c_ref[j]).abs() < 1e-12);
            }
            state = next;
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = LstmParams::zeros(3, 2);
        assert!(p.forward(&[1.0], &LstmState::zeros(2)).is_err());
        let (_, cache) = p.forward(&[1.0, 2.0, 3.0], &LstmState::zeros(2)).unwrap();
        let other = LstmParams::zeros(4, 2);
        let mut g = other.zeros_like();
        assert!(other.backward(&cache, &[0.0; 2], &[0.0; 2], &mut g).is_err());
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = LstmParams::new(3, 4, &mut rng);
        let (_, cache) = p.forward(&[0.3, -0.2, 0.9], &LstmState::zeros(4)).unwrap();
        let mut grads = p.zeros_like();
        let (dx, dprev) = p.backward(&cache, &[0.0; 4], &[0.0; 4], &mut grads).unwrap();
        assert!(dx.iter().chain(&dprev.h).chain(&dprev.c).all(|&v| v == 0.0));
        assert!(grads.tensors().iter().all(|(_, t)| t.as_slice().iter().all(|&v| v == 0.0)));
    }

    /// Loss = sum of h over the final step of an unrolled chain.
    fn chain_loss(p: &LstmParams, xs: &[Vec<f64>], init: &LstmState) -> f64 {
        let mut s = init.clone();
        for x in xs {
            s = p.forward(x, &s).unwrap().0;
        }
        s.h.iter().sum()
    }

    fn chain_grads(p: &LstmParams, xs: &[Vec<f64>], init: &LstmState) -> (LstmParams, Vec<Vec<f64>>) {
        let mut s = init.clone();
        let mut caches = Vec::new();
        for x in xs {
            let (n, c) = p.forward(x, &s).unwrap();
            caches.push(c);
            s = n;
        }
        let hd = p.hidden_dim;
        let mut grads = p.zeros_like();
        let mut dh = vec![1.0; hd];
        let mut dc = vec![0.0; hd];
        let mut dxs = Vec::new();
        for cache in caches.iter().rev() {
            let (dx, prev) = p.backward(cache, &dh, &dc, &mut grads).unwrap();
            dxs.push(dx);
            dh = prev.h;
            dc = prev.c;
        }
        dxs.reverse();
        (grads, dxs)
    }

    fn check_chain(len: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = LstmParams::new(3, 4, &mut rng);
        let xs: Vec<Vec<f64>> = (0..len).map(|_| random_vec(&mut rng, 3, 1.5)).collect();
        let init = LstmState {
            h: random_vec(&mut rng, 4, 0.5),
            c: random_vec(&mut rng, 4, 0.5),
        };
        let (analytic, dxs) = chain_grads(&p, &xs, &init);
        let numeric = finite_diff_grad(|q: &LstmParams| chain_loss(q, &xs, &init), &p, 1e-5);
        let report = max_relative_error(&analytic, &numeric);
        for (name, err) in &report {
            assert!(*err < 1e-4, "{name}: {err}");
        }

        // input gradients
        for t in 0..len {
            for k in 0..3 {
                let eps = 1e-5;
                let mut plus = xs.clone();
                plus[t][k] += eps;
                let mut minus = xs.clone();
                minus[t][k] -= eps;
                let fd = (chain_loss(&p, &plus, &init) - chain_loss(&p, &minus, &init)) / (2.0 * eps);
                let rel = (fd - dxs[t][k]).abs() / fd.abs().max(dxs[t][k].abs()).max(1e-6);
                assert!(rel < 1e-4, "dx[{t}][{k}] {fd} vs {}", dxs[t][k]);
            }
        }
    }

    #[test]
    fn single_step_gradient_matches_finite_differences() {
        check_chain(1, 11);
    }

    #[test]
    fn ten_step_gradient_matches_finite_differences() {
        check_chain(10, 12);
    }

    #[test]
    fn large_inputs_stay_finite_through_backward() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = LstmParams::new(4, 3, &mut rng);
        let xs: Vec<Vec<f64>> = (0..20).map(|_| random_vec(&mut rng, 4, 1e3)).collect();
        let (grads, dxs) = chain_grads(&p, &xs, &LstmState::zeros(3));
        assert!(grads.all_finite());
        assert!(dxs.iter().flatten().all(|v| v.is_finite()));
    }
}
