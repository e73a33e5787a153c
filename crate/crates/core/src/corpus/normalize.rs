use super::types::FeatureStream;

/// Per-dimension z-scores over the whole stream (sample variance).
/// Constant dimensions become all zeros.
pub fn zscore_normalize(stream: &FeatureStream) -> FeatureStream {
    let mut out = stream.clone();
    let n = stream.len();
    for d in 0..stream.dim() {
        let mean = stream.vectors.iter().map(|v| v[d]).sum::<f64>() / n as f64;
        let var = if n > 1 {
            stream.vectors.iter().map(|v| (v[d] - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let sd = var.sqrt();
        for v in &mut out.vectors {
            v[d] = if sd > 0.0 { (v[d] - mean) / sd } else { 0.0 };
        }
    }
    out
}

/// Averages frames into windows of `period_ms`; frame `t` falls into the
/// window `(k·p, (k+1)·p]`, stamped at its end. Empty windows repeat the
/// previous average.
pub fn resample_mean(stream: &FeatureStream, period_ms: f64, duration_s: f64) -> FeatureStream {
    let p = period_ms / 1000.0;
    let n_windows = (duration_s / p + 1e-9).floor() as usize;
    let dim = stream.dim();
    let mut timestamps = Vec::with_capacity(n_windows);
    let mut vectors = Vec::with_capacity(n_windows);
    let mut last = vec![0.0; dim];
    let mut cursor = 0;
    for k in 0..n_windows {
        let end = (k + 1) as f64 * p;
        let mut sum = vec![0.0; dim];
        let mut count = 0usize;
        while cursor < stream.len() && stream.timestamps[cursor] <= end + 1e-9 {
            for (s, v) in sum.iter_mut().zip(&stream.vectors[cursor]) {
                *s += v;
            }
            count += 1;
            cursor += 1;
        }
        if count > 0 {
            last = sum.into_iter().map(|s| s / count as f64).collect();
        }
        timestamps.push(end);
        vectors.push(last.clone());
    }
    FeatureStream {
        speaker: stream.speaker,
        modality: stream.modality.clone(),
        timestamps,
        vectors,
        nominal_rate_ms: Some(period_ms),
    }
}
