use rand::seq::SliceRandom;

use super::config::NetworkConfig;
use super::network::{
    backward_sequence, derived_rng, run_segment, run_sequence, track_bce, FrameTarget,
    GradStore, MultiscaleState, NetworkParams, RunMode, SequenceInputs,
};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, Parameters};
use crate::par::{self, Execution};

/// Default truncation length: 100 master ticks, i.e. 5 seconds.
pub const DEFAULT_T_BPTT: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub t_bptt: usize,
    /// Sequences advanced together; their segment gradients are averaged
    /// into one optimizer step.
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            t_bptt: DEFAULT_T_BPTT,
            batch_size: 4,
            adam: AdamConfig::default(),
            seed: 0,
            exec: Execution::available(),
        }
    }
}

/// Inputs of one target-speaker perspective plus one target per master tick.
#[derive(Clone, Debug)]
pub struct TrainSequence {
    pub inputs: SequenceInputs,
    pub targets: Vec<FrameTarget>,
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    /// Mean training BCE per epoch (with dropout active).
    pub loss_curve: Vec<f64>,
    pub optimizer_steps: u64,
}

struct SegmentResult {
    state: MultiscaleState,
    grads: GradStore,
    loss: f64,
    frames: usize,
}

/// Truncated-BPTT training with Adam.
pub fn train(
    params: &mut NetworkParams,
    config: &NetworkConfig,
    data: &[TrainSequence],
    tc: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    params.check_shapes(config)?;
    if data.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    if tc.t_bptt == 0 || tc.batch_size == 0 {
        return Err(Error::Config("t_bptt and batch_size must be positive".into()));
    }

    let mut adam = AdamState::new(params, tc.adam);
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut shuffle_rng = derived_rng(tc.seed, &[u64::MAX]);

    for epoch in 0..tc.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut epoch_frames = 0usize;

        for batch in order.chunks(tc.batch_size) {
            let mut states: Vec<MultiscaleState> =
                batch.iter().map(|_| MultiscaleState::zeros(config)).collect();
            let n_segments = batch
                .iter()
                .map(|&i| data[i].targets.len().div_ceil(tc.t_bptt))
                .max()
                .unwrap_or(0);

            for seg in 0..n_segments {
                let jobs: Vec<usize> = (0..batch.len())
                    .filter(|&k| seg * tc.t_bptt < data[batch[k]].targets.len())
                    .collect();
                let snapshot: &NetworkParams = params;
                let results = par::map(tc.exec, &jobs, |&k| -> Result<SegmentResult> {
                    let seq = &data[batch[k]];
                    let start = seg * tc.t_bptt;
                    let end = (start + tc.t_bptt).min(seq.targets.len());
                    let mut state = states[k].clone();
                    let mut rng =
                        derived_rng(tc.seed, &[epoch as u64, batch[k] as u64, seg as u64]);
                    let (_, caches) = run_segment(
                        snapshot,
                        config,
                        &seq.inputs,
                        start..end,
                        &mut state,
                        &mut RunMode::Train(&mut rng),
                    )?;
                    let (grads, loss) =
                        backward_sequence(snapshot, config, &caches, &seq.targets[start..end])?;
                    Ok(SegmentResult {
                        state,
                        grads,
                        loss,
                        frames: end - start,
                    })
                });

                let results = results.into_iter().collect::<Result<Vec<_>>>()?;
                let total: usize = results.iter().map(|r| r.frames).sum();
                let mut grads = params.zeros_like();
                for (&k, r) in jobs.iter().zip(results) {
                    if !r.loss.is_finite() || !r.grads.all_finite() {
                        return Err(Error::Numeric(format!(
                            "divergence in epoch {epoch}: loss {}",
                            r.loss
                        )));
                    }
                    grads.add_scaled(&r.grads, r.frames as f64 / total as f64);
                    epoch_loss += r.loss * r.frames as f64;
                    epoch_frames += r.frames;
                    states[k] = r.state;
                }
                adam.step(params, &grads, config.l2_lambda);
                report.optimizer_steps += 1;
            }
        }

        let mean = epoch_loss / epoch_frames.max(1) as f64;
        if !mean.is_finite() || !params.all_finite() {
            return Err(Error::Numeric(format!("training diverged in epoch {epoch}")));
        }
        log::debug!("epoch {epoch}: train bce {mean:.5}");
        report.loss_curve.push(mean);
    }
    Ok(report)
}

/// Frame-weighted mean BCE over full sequences, without dropout.
pub fn evaluate_bce(
    params: &NetworkParams,
    config: &NetworkConfig,
    data: &[TrainSequence],
    exec: Execution,
) -> Result<f64> {
    let per_seq = par::map(exec, data, |seq| -> Result<(f64, usize)> {
        let (track, _) = run_sequence(params, config, &seq.inputs, seq.targets.len(), &mut RunMode::Eval)?;
        Ok((track_bce(&track, &seq.targets)?, seq.targets.len()))
    });
    let mut loss = 0.0;
    let mut frames = 0;
    for r in per_seq {
        let (l, n) = r?;
        loss += l * n as f64;
        frames += n;
    }
    if frames == 0 {
        return Err(Error::Data("no frames to evaluate".into()));
    }
    Ok(loss / frames as f64)
}
