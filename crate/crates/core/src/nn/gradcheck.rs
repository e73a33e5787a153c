//! Central finite-difference gradients, used as the oracle for every
//! analytic backward pass.

use super::Parameters;

/// Coordinates whose gradients are both below this magnitude are compared
/// on an absolute scale.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

/// `(f(θ+ε) − f(θ−ε)) / 2ε` for every coordinate of `params`.
pub fn finite_diff_grad<P, F>(mut loss_fn: F, params: &P, eps: f64) -> P
where
    P: Parameters,
    F: FnMut(&P) -> f64,
{
    let mut grads = params.zeros_like();
    let mut probe = params.clone();
    let shapes: Vec<usize> = params.tensors().iter().map(|(_, t)| t.as_slice().len()).collect();
    for (ti, &len) in shapes.iter().enumerate() {
        for k in 0..len {
            let orig = params.tensors()[ti].1.as_slice()[k];
            probe.tensors_mut()[ti].as_mut_slice()[k] = orig + eps;
            let plus = loss_fn(&probe);
            probe.tensors_mut()[ti].as_mut_slice()[k] = orig - eps;
            let minus = loss_fn(&probe);
            probe.tensors_mut()[ti].as_mut_slice()[k] = orig;
            grads.tensors_mut()[ti].as_mut_slice()[k] = (plus - minus) / (2.0 * eps);
        }
    }
    grads
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// Max relative error per named tensor.
pub fn max_relative_error<P: Parameters>(analytic: &P, numeric: &P) -> Vec<(String, f64)> {
    analytic
        .tensors()
        .into_iter()
        .zip(numeric.tensors())
        .map(|((name, a), (_, n))| {
            let err = a
                .as_slice()
                .iter()
                .zip(n.as_slice())
                .map(|(&x, &y)| relative_error(x, y))
                .fold(0.0, f64::max);
            (name, err)
        })
        .collect()
}
