//! Full-network gradient verification against central finite differences.

use rand::Rng;

use super::config::{
    Arrangement, EmbeddingConfig, InputKind, ModalityConfig, NetworkConfig, Timescale,
};
use super::network::{
    backward_sequence, derived_rng, run_sequence, track_bce, FrameTarget, NetworkParams, RunMode,
    SequenceInputs, TimedInput,
};
use crate::error::Result;
use crate::nn::{finite_diff_grad, max_relative_error, Matrix, Parameters, HORIZON};
use crate::FRAME_SECONDS;

pub const GRADCHECK_EPS: f64 = 1e-5;
pub const GRADCHECK_TOL: f64 = 1e-4;

/// A network, its inputs and its targets.
#[derive(Clone, Debug)]
pub struct GradcheckCase {
    pub name: String,
    pub config: NetworkConfig,
    pub params: NetworkParams,
    pub inputs: SequenceInputs,
    pub targets: Vec<FrameTarget>,
}

#[derive(Clone, Debug)]
pub struct CaseReport {
    pub name: String,
    /// Max relative error per tensor.
    pub tensors: Vec<(String, f64)>,
}

impl CaseReport {
    pub fn max_error(&self) -> f64 {
        self.tensors.iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_error() < GRADCHECK_TOL
    }
}

/// Deliberate corruption of the analytic gradient, used to prove the check
/// can fail.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Fault {
    #[default]
    None,
    /// Scales the analytic master-cell gradient by 1.01.
    ScaleMasterGradient,
}

/// Analytic vs finite-difference gradients of the mean BCE over the case's
/// full unroll (no truncation, no dropout).
pub fn check_case(case: &GradcheckCase, fault: Fault) -> Result<CaseReport> {
    let n = case.targets.len();
    let (_, caches) = run_sequence(
        &case.params,
        &case.config,
        &case.inputs,
        n,
        &mut RunMode::Train(&mut derived_rng(0, &[])),
    )?;
    let (mut analytic, _) = backward_sequence(&case.params, &case.config, &caches, &case.targets)?;
    if fault == Fault::ScaleMasterGradient {
        for t in analytic.master.tensors_mut() {
            let scaled: Vec<f64> = t.as_slice().iter().map(|v| v * 1.01).collect();
            *t = Matrix::from_vec(t.rows(), t.cols(), scaled)?;
        }
    }
    let loss = |p: &NetworkParams| -> f64 {
        let (track, _) = run_sequence(p, &case.config, &case.inputs, n, &mut RunMode::Eval)
            .expect("gradcheck forward");
        track_bce(&track, &case.targets).expect("gradcheck loss")
    };
    let numeric = finite_diff_grad(loss, &case.params, GRADCHECK_EPS);
    Ok(CaseReport {
        name: case.name.clone(),
        tensors: max_relative_error(&analytic, &numeric),
    })
}

const DENSE_DIM: usize = 3;
const TOKEN_SLOTS: usize = 2;

fn dense_modality(name: &str, period_ms: f64, hidden: usize) -> ModalityConfig {
    ModalityConfig {
        name: name.into(),
        input: InputKind::Dense { dim: DENSE_DIM },
        timescale: Timescale::regular(period_ms),
        subnet_hidden: hidden,
    }
}

fn token_modality(name: &str, timescale: Timescale, hidden: usize) -> ModalityConfig {
    ModalityConfig {
        name: name.into(),
        input: InputKind::Tokens { slots: TOKEN_SLOTS },
        timescale,
        subnet_hidden: hidden,
    }
}

fn regular_stream<R: Rng>(rng: &mut R, period_ms: f64, duration_s: f64, kind: InputKind) -> Vec<TimedInput> {
    let n = (duration_s * 1000.0 / period_ms).round() as usize;
    (1..=n)
        .map(|k| {
            let t = k as f64 * period_ms / 1000.0;
            random_event(rng, t, kind, 0.5)
        })
        .collect()
}

fn random_event<R: Rng>(rng: &mut R, t: f64, kind: InputKind, p_token: f64) -> TimedInput {
    match kind {
        InputKind::Dense { dim } => {
            TimedInput::dense(t, (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect())
        }
        InputKind::Tokens { slots } => TimedInput::tokens(
            t,
            (0..slots)
                .map(|_| rng.random_bool(p_token).then(|| rng.random_range(0..5)))
                .collect(),
        ),
    }
}

/// Builds inputs, random parameters and random targets for `config`.
pub fn random_case(name: &str, config: NetworkConfig, n_steps: usize, seed: u64) -> Result<GradcheckCase> {
    let mut rng = derived_rng(seed, &[7]);
    let duration_s = n_steps as f64 * FRAME_SECONDS;
    let streams = config
        .modalities
        .iter()
        .map(|m| match m.timescale {
            Timescale::Regular { period_ms } => regular_stream(&mut rng, period_ms, duration_s, m.input),
            Timescale::Asynchronous => {
                // irregular event times, some intervals empty
                let mut t = 0.0;
                let mut events = Vec::new();
                loop {
                    t += rng.random_range(0.02..0.13);
                    if t > duration_s {
                        break;
                    }
                    events.push(random_event(&mut rng, t, m.input, 0.8));
                }
                events
            }
        })
        .collect();
    let params = NetworkParams::new(&config, &mut rng)?;
    let targets = (0..n_steps)
        .map(|_| std::array::from_fn::<bool, HORIZON, _>(|_| rng.random_bool(0.5)))
        .collect();
    Ok(GradcheckCase {
        name: name.into(),
        config,
        params,
        inputs: SequenceInputs { duration_s, streams },
        targets,
    })
}

/// Every arrangement with the clock sets it admits: `{50ms}`,
/// `{10ms + 50ms}` and `{10ms + asynchronous}`.
pub fn standard_cases(n_steps: usize, seed: u64) -> Result<Vec<GradcheckCase>> {
    let base = |arrangement, modalities| NetworkConfig {
        arrangement,
        modalities,
        master_hidden: 5,
        dropout_p: 0.0,
        l2_lambda: 0.0,
        hidden_budget_check: true,
        embedding: Some(EmbeddingConfig { vocab_size: 5, dim: 3 }),
    };
    let configs = vec![
        (
            "no_subnets {50ms}",
            base(
                Arrangement::NoSubnets,
                vec![dense_modality("acous", 50.0, 0), token_modality("ling", Timescale::regular(50.0), 0)],
            ),
        ),
        (
            "no_subnets {10ms}",
            base(
                Arrangement::NoSubnets,
                vec![dense_modality("acous", 10.0, 0), token_modality("ling", Timescale::regular(10.0), 0)],
            ),
        ),
        (
            "no_subnets {async}",
            base(Arrangement::NoSubnets, vec![token_modality("ling", Timescale::Asynchronous, 0)]),
        ),
        (
            "one_subnet {50ms}",
            base(
                Arrangement::OneSubnet,
                vec![dense_modality("acous", 50.0, 4), token_modality("ling", Timescale::regular(50.0), 4)],
            ),
        ),
        (
            "one_subnet {10ms}",
            base(
                Arrangement::OneSubnet,
                vec![dense_modality("acous", 10.0, 4), token_modality("ling", Timescale::regular(10.0), 4)],
            ),
        ),
        (
            "two_subnets {50ms}",
            base(
                Arrangement::TwoSubnets,
                vec![dense_modality("acous", 50.0, 4), token_modality("ling", Timescale::regular(50.0), 3)],
            ),
        ),
        (
            "two_subnets {10ms + 50ms}",
            base(
                Arrangement::TwoSubnets,
                vec![dense_modality("acous", 10.0, 4), token_modality("ling", Timescale::regular(50.0), 3)],
            ),
        ),
        (
            "two_subnets {10ms + async}",
            base(
                Arrangement::TwoSubnets,
                vec![dense_modality("acous", 10.0, 4), token_modality("ling", Timescale::Asynchronous, 3)],
            ),
        ),
    ];
    configs
        .into_iter()
        .enumerate()
        .map(|(i, (name, cfg))| random_case(name, cfg, n_steps, seed.wrapping_add(i as u64)))
        .collect()
}
