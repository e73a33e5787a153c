use super::head::HORIZON;

/// Probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` before taking logs.
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Clone, Debug)]
pub struct BceOutput {
    /// Mean binary cross entropy over the frame's outputs.
    pub loss: f64,
    /// `∂loss/∂y` using the clamped probabilities.
    pub grad_y: Vec<f64>,
    /// `∂loss/∂logit = (y - t) / n`, the stable form when `y = σ(logit)`.
    pub grad_logit: Vec<f64>,
    /// Number of entries that had to be clamped.
    pub clamped: usize,
}

/// Mean binary cross entropy of `y` against binary `target`.
pub fn bce_loss(y: &[f64], target: &[bool]) -> BceOutput {
    debug_assert_eq!(y.len(), target.len());
    let n = y.len().max(1) as f64;
    let mut loss = 0.0;
    let mut clamped = 0;
    let mut grad_y = Vec::with_capacity(y.len());
    let mut grad_logit = Vec::with_capacity(y.len());
    for (&p, &t) in y.iter().zip(target) {
        let pc = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        if pc != p || p.is_nan() {
            clamped += 1;
        }
        let pc = if pc.is_nan() { 0.5 } else { pc };
        let tv = if t { 1.0 } else { 0.0 };
        loss -= tv * pc.ln() + (1.0 - tv) * (1.0 - pc).ln();
        grad_y.push((pc - tv) / (pc * (1.0 - pc)) / n);
        grad_logit.push((p - tv) / n);
    }
    if clamped > 0 {
        log::warn!("bce: clamped {clamped} saturated probabilities");
    }
    BceOutput {
        loss: loss / n,
        grad_y,
        grad_logit,
        clamped,
    }
}

/// Convenience for a full future-window frame.
pub fn frame_bce(y: &[f64], target: &[bool; HORIZON]) -> BceOutput {
    bce_loss(y, target)
}
