//! Forward and backward passes through the multiscale unrolling.
//!
//! Every master tick covers the half-open interval `(k·50ms, (k+1)·50ms]`
//! (tick 0 also owns `t = 0`). Inside a tick each sub-network consumes its own
//! events in timestamp order, then its hidden state is latched into the
//! master input. A sub-network with no events in the interval keeps both its
//! state and its latch.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Arrangement, Group, InputKind, NetworkConfig};
use crate::error::{check_dim, Error, Result};
use crate::nn::{
    bce_loss, dropout_mask, DenseSigmoidParams, EmbeddingTable, LstmCache, LstmParams, LstmState,
    Matrix, Parameters, HORIZON,
};
use crate::FRAME_SECONDS;

/// Timestamps closer than this are the same instant.
pub const TIME_TOL: f64 = 1e-9;

/// Binary activity of the target speaker over the next `HORIZON` frames.
pub type FrameTarget = [bool; HORIZON];

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Dense(Vec<f64>),
    /// One optional vocabulary index per slot.
    Tokens(Vec<Option<usize>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimedInput {
    pub timestamp: f64,
    pub features: Payload,
}

impl TimedInput {
    pub fn dense(timestamp: f64, values: Vec<f64>) -> Self {
        Self {
            timestamp,
            features: Payload::Dense(values),
        }
    }

    pub fn tokens(timestamp: f64, tokens: Vec<Option<usize>>) -> Self {
        Self {
            timestamp,
            features: Payload::Tokens(tokens),
        }
    }
}

/// Per-modality event streams of one sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceInputs {
    pub duration_s: f64,
    pub streams: Vec<Vec<TimedInput>>,
}

/// All trainable tensors of a multiscale network.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub subnets: Vec<LstmParams>,
    pub master: LstmParams,
    pub head: DenseSigmoidParams,
    pub embedding: Option<EmbeddingTable>,
}

/// Gradients share the parameter layout.
pub type GradStore = NetworkParams;

impl NetworkParams {
    pub fn new<R: rand::Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let embedding = match config.embedding {
            Some(e) => Some(EmbeddingTable::new(e.vocab_size, e.dim, rng)?),
            None => None,
        };
        let subnets = config
            .groups()
            .iter()
            .filter(|g| !g.is_direct())
            .map(|g| LstmParams::new(g.input_dim, g.hidden, rng))
            .collect();
        let master = LstmParams::new(config.master_input_dim(), config.master_hidden, rng);
        let head = DenseSigmoidParams::new(config.master_hidden, rng);
        Ok(Self {
            subnets,
            master,
            head,
            embedding,
        })
    }

    pub fn zeros(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            subnets: config
                .groups()
                .iter()
                .filter(|g| !g.is_direct())
                .map(|g| LstmParams::zeros(g.input_dim, g.hidden))
                .collect(),
            master: LstmParams::zeros(config.master_input_dim(), config.master_hidden),
            head: DenseSigmoidParams::zeros(config.master_hidden),
            embedding: config.embedding.map(|e| EmbeddingTable::zeros(e.vocab_size, e.dim)),
        })
    }

    /// Checks that every tensor is shaped for `config`.
    pub fn check_shapes(&self, config: &NetworkConfig) -> Result<()> {
        let expected = Self::zeros(config)?;
        let got: Vec<_> = self.tensors().into_iter().map(|(n, t)| (n, t.shape())).collect();
        let want: Vec<_> = expected.tensors().into_iter().map(|(n, t)| (n, t.shape())).collect();
        if got != want {
            return Err(Error::Config(format!(
                "parameter shapes {got:?} do not match configuration {want:?}"
            )));
        }
        Ok(())
    }
}

impl Parameters for NetworkParams {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        for (i, s) in self.subnets.iter().enumerate() {
            for (n, t) in s.tensors() {
                out.push((format!("subnet{i}.{n}"), t));
            }
        }
        for (n, t) in self.master.tensors() {
            out.push((format!("master.{n}"), t));
        }
        for (n, t) in self.head.tensors() {
            out.push((format!("head.{n}"), t));
        }
        if let Some(e) = &self.embedding {
            out.push(("embedding".to_string(), &e.table));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::new();
        for s in &mut self.subnets {
            out.extend(s.tensors_mut());
        }
        out.extend(self.master.tensors_mut());
        out.extend(self.head.tensors_mut());
        if let Some(e) = &mut self.embedding {
            out.push(&mut e.table);
        }
        out
    }
}

/// Recurrent state carried between master ticks.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiscaleState {
    pub master: LstmState,
    pub subnets: Vec<LstmState>,
    /// Sub-network hidden states as last sampled by the master.
    pub latched: Vec<Vec<f64>>,
}

impl MultiscaleState {
    pub fn zeros(config: &NetworkConfig) -> Self {
        let hidden: Vec<usize> = config
            .groups()
            .iter()
            .filter(|g| !g.is_direct())
            .map(|g| g.hidden)
            .collect();
        Self {
            master: LstmState::zeros(config.master_hidden),
            subnets: hidden.iter().map(|&h| LstmState::zeros(h)).collect(),
            latched: hidden.iter().map(|&h| vec![0.0; h]).collect(),
        }
    }
}

/// Evaluation runs deterministically without caches; training keeps caches
/// and draws dropout masks from the supplied generator.
pub enum RunMode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

impl RunMode<'_> {
    fn is_train(&self) -> bool {
        matches!(self, RunMode::Train(_))
    }
}

#[derive(Clone, Debug)]
struct CellUpdate {
    cache: LstmCache,
    /// `(offset in the cell input, vocabulary index)` for embedded slots.
    tokens: Vec<(usize, usize)>,
}

/// Everything the backward pass needs from one master tick.
#[derive(Clone, Debug)]
pub struct StepCache {
    /// Cell updates per group, in time order.
    updates: Vec<Vec<CellUpdate>>,
    latch_masks: Vec<Option<Vec<f64>>>,
    fusion: Option<LstmCache>,
    head_input: Vec<f64>,
    out_mask: Option<Vec<f64>>,
    pub y: Vec<f64>,
}

impl StepCache {
    /// Number of cell updates each group performed during this tick.
    pub fn update_counts(&self) -> Vec<usize> {
        self.updates.iter().map(Vec::len).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub step: usize,
}

impl Interval {
    pub fn start(&self) -> f64 {
        self.step as f64 * FRAME_SECONDS
    }

    pub fn end(&self) -> f64 {
        (self.step + 1) as f64 * FRAME_SECONDS
    }

    pub fn contains(&self, t: f64) -> bool {
        let above = if self.step == 0 {
            t >= -TIME_TOL
        } else {
            t > self.start() + TIME_TOL
        };
        above && t <= self.end() + TIME_TOL
    }
}

fn encode(
    params: &NetworkParams,
    config: &NetworkConfig,
    modality: usize,
    payload: &Payload,
    offset: usize,
    out: &mut [f64],
    tokens: &mut Vec<(usize, usize)>,
) -> Result<()> {
    let m = &config.modalities[modality];
    match (&m.input, payload) {
        (InputKind::Dense { dim }, Payload::Dense(v)) => {
            check_dim("dense features", *dim, v.len())?;
            out[offset..offset + dim].copy_from_slice(v);
        }
        (InputKind::Tokens { slots }, Payload::Tokens(ids)) => {
            check_dim("token slots", *slots, ids.len())?;
            let table = params
                .embedding
                .as_ref()
                .ok_or_else(|| Error::Config("token input without embedding".into()))?;
            let dim = table.dim();
            for (s, id) in ids.iter().enumerate() {
                if let Some(id) = *id {
                    let at = offset + s * dim;
                    out[at..at + dim].copy_from_slice(table.lookup(id)?);
                    tokens.push((at, id));
                }
            }
        }
        _ => {
            return Err(Error::Data(format!(
                "payload kind does not match modality `{}`",
                m.name
            )))
        }
    }
    Ok(())
}

/// Merges the group's per-modality events into cell inputs, one per distinct
/// timestamp; modalities without an event at that instant contribute zeros.
fn group_inputs(
    params: &NetworkParams,
    config: &NetworkConfig,
    group: &Group,
    inputs: &[&[TimedInput]],
) -> Result<Vec<(Vec<f64>, Vec<(usize, usize)>)>> {
    let offsets: Vec<usize> = group
        .modalities
        .iter()
        .scan(0, |acc, &m| {
            let o = *acc;
            *acc += config.modalities[m].feature_dim(config.embedding);
            Some(o)
        })
        .collect();
    let mut cursors = vec![0usize; group.modalities.len()];
    let mut out = Vec::new();
    loop {
        let next = group
            .modalities
            .iter()
            .zip(&cursors)
            .filter_map(|(&m, &c)| inputs[m].get(c).map(|e| e.timestamp))
            .fold(f64::INFINITY, f64::min);
        if next == f64::INFINITY {
            break;
        }
        let mut x = vec![0.0; group.input_dim];
        let mut tokens = Vec::new();
        for (k, &m) in group.modalities.iter().enumerate() {
            if let Some(e) = inputs[m].get(cursors[k]) {
                if (e.timestamp - next).abs() <= TIME_TOL {
                    encode(params, config, m, &e.features, offsets[k], &mut x, &mut tokens)?;
                    cursors[k] += 1;
                }
            }
        }
        out.push((x, tokens));
    }
    Ok(out)
}

fn apply_mask(v: &[f64], mask: &Option<Vec<f64>>) -> Vec<f64> {
    match mask {
        Some(m) => v.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => v.to_vec(),
    }
}

fn draw_mask(dim: usize, p: f64, mode: &mut RunMode<'_>) -> Result<Option<Vec<f64>>> {
    match mode {
        RunMode::Train(rng) if p > 0.0 => Ok(Some(dropout_mask(dim, p, *rng)?)),
        _ => Ok(None),
    }
}

/// Advances the network by one master tick.
///
/// `inputs[m]` holds modality `m`'s events inside `interval`, in time order.
pub fn master_step(
    params: &NetworkParams,
    config: &NetworkConfig,
    state: &mut MultiscaleState,
    interval: Interval,
    inputs: &[&[TimedInput]],
    mode: &mut RunMode<'_>,
) -> Result<(Vec<f64>, Option<StepCache>)> {
    check_dim("modality streams", config.modalities.len(), inputs.len())?;
    for (m, events) in inputs.iter().enumerate() {
        let mut last = f64::NEG_INFINITY;
        for e in events.iter() {
            if !interval.contains(e.timestamp) {
                return Err(Error::Ordering(format!(
                    "`{}` event at {}s outside master interval ({}, {}]",
                    config.modalities[m].name,
                    e.timestamp,
                    interval.start(),
                    interval.end()
                )));
            }
            if e.timestamp <= last {
                return Err(Error::Ordering(format!(
                    "`{}` timestamps not strictly increasing at {}s",
                    config.modalities[m].name, e.timestamp
                )));
            }
            last = e.timestamp;
        }
    }

    let train = mode.is_train();
    let groups = config.groups();
    let mut updates = Vec::with_capacity(groups.len());
    let mut latch_masks = Vec::new();
    let mut fusion = None;

    if config.arrangement == Arrangement::NoSubnets {
        let mut group_updates = Vec::new();
        for (x, tokens) in group_inputs(params, config, &groups[0], inputs)? {
            let (next, cache) = params.master.forward(&x, &state.master)?;
            state.master = next;
            if train {
                group_updates.push(CellUpdate { cache, tokens });
            }
        }
        updates.push(group_updates);
    } else {
        let mut master_x = Vec::with_capacity(config.master_input_dim());
        for (g, group) in groups.iter().enumerate() {
            let mut group_updates = Vec::new();
            for (x, tokens) in group_inputs(params, config, group, inputs)? {
                let (next, cache) = params.subnets[g].forward(&x, &state.subnets[g])?;
                state.subnets[g] = next;
                if train {
                    group_updates.push(CellUpdate { cache, tokens });
                }
            }
            updates.push(group_updates);
            state.latched[g].clone_from(&state.subnets[g].h);
            let mask = draw_mask(group.hidden, config.dropout_p, mode)?;
            master_x.extend(apply_mask(&state.latched[g], &mask));
            latch_masks.push(mask);
        }
        let (next, cache) = params.master.forward(&master_x, &state.master)?;
        state.master = next;
        fusion = Some(cache);
    }

    let out_mask = draw_mask(config.master_hidden, config.dropout_p, mode)?;
    let head_input = apply_mask(&state.master.h, &out_mask);
    let y = params.head.forward(&head_input)?;
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite prediction at tick {}", interval.step)));
    }

    let cache = train.then(|| StepCache {
        updates,
        latch_masks,
        fusion,
        head_input,
        out_mask,
        y: y.clone(),
    });
    Ok((y, cache))
}

fn interval_slice(events: &[TimedInput], interval: Interval) -> &[TimedInput] {
    let lo = if interval.step == 0 {
        0
    } else {
        events.partition_point(|e| e.timestamp <= interval.start() + TIME_TOL)
    };
    let hi = events.partition_point(|e| e.timestamp <= interval.end() + TIME_TOL);
    &events[lo..hi.max(lo)]
}

/// Runs master ticks `steps` starting from `state`, which is left at the end
/// of the segment. Returns one prediction per tick and, in training mode, the
/// per-tick caches.
pub fn run_segment(
    params: &NetworkParams,
    config: &NetworkConfig,
    inputs: &SequenceInputs,
    steps: Range<usize>,
    state: &mut MultiscaleState,
    mode: &mut RunMode<'_>,
) -> Result<(Vec<Vec<f64>>, Vec<StepCache>)> {
    check_dim("modality streams", config.modalities.len(), inputs.streams.len())?;
    let horizon_s = steps.end as f64 * FRAME_SECONDS;
    if horizon_s > inputs.duration_s + TIME_TOL {
        return Err(Error::Data(format!(
            "requested {} ticks ({horizon_s}s) but inputs cover only {}s",
            steps.end, inputs.duration_s
        )));
    }
    let mut track = Vec::with_capacity(steps.len());
    let mut caches = Vec::new();
    for step in steps {
        let interval = Interval { step };
        let slices: Vec<&[TimedInput]> = inputs
            .streams
            .iter()
            .map(|s| interval_slice(s, interval))
            .collect();
        let (y, cache) = master_step(params, config, state, interval, &slices, mode)?;
        track.push(y);
        caches.extend(cache);
    }
    Ok((track, caches))
}

/// Runs `n_steps` master ticks from a zero state.
pub fn run_sequence(
    params: &NetworkParams,
    config: &NetworkConfig,
    inputs: &SequenceInputs,
    n_steps: usize,
    mode: &mut RunMode<'_>,
) -> Result<(Vec<Vec<f64>>, Vec<StepCache>)> {
    let mut state = MultiscaleState::zeros(config);
    run_segment(params, config, inputs, 0..n_steps, &mut state, mode)
}

/// Mean per-frame BCE of a prediction track against its targets.
pub fn track_bce(track: &[Vec<f64>], targets: &[FrameTarget]) -> Result<f64> {
    check_dim("targets", track.len(), targets.len())?;
    if track.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = track
        .iter()
        .zip(targets)
        .map(|(y, t)| bce_loss(y, t).loss)
        .sum();
    Ok(total / track.len() as f64)
}

/// Backpropagation through a training segment. Returns the gradient of the
/// mean per-frame BCE and the loss itself. Gradients stop at the segment
/// start.
pub fn backward_sequence(
    params: &NetworkParams,
    config: &NetworkConfig,
    caches: &[StepCache],
    targets: &[FrameTarget],
) -> Result<(GradStore, f64)> {
    if caches.len() != targets.len() {
        return Err(Error::Data(format!(
            "{} cached ticks but {} target frames",
            caches.len(),
            targets.len()
        )));
    }
    let mut grads = params.zeros_like();
    if caches.is_empty() {
        return Ok((grads, 0.0));
    }
    let scale = 1.0 / caches.len() as f64;
    let groups = config.groups();
    let direct = config.arrangement == Arrangement::NoSubnets;

    let mut dh_master = vec![0.0; config.master_hidden];
    let mut dc_master = vec![0.0; config.master_hidden];
    let mut carry: Vec<LstmState> = groups
        .iter()
        .filter(|g| !g.is_direct())
        .map(|g| LstmState::zeros(g.hidden))
        .collect();
    let mut loss = 0.0;

    for (cache, target) in caches.iter().zip(targets).rev() {
        let bce = bce_loss(&cache.y, target);
        loss += bce.loss;
        let grad_logit: Vec<f64> = bce.grad_logit.iter().map(|g| g * scale).collect();
        let dh_head = params
            .head
            .backward(&cache.head_input, &grad_logit, &mut grads.head);
        for (d, g) in dh_master.iter_mut().zip(apply_mask(&dh_head, &cache.out_mask)) {
            *d += g;
        }

        if direct {
            for update in cache.updates[0].iter().rev() {
                let (dx, prev) =
                    params
                        .master
                        .backward(&update.cache, &dh_master, &dc_master, &mut grads.master)?;
                scatter_tokens(&mut grads, &update.tokens, &dx)?;
                dh_master = prev.h;
                dc_master = prev.c;
            }
            continue;
        }

        let fusion = cache
            .fusion
            .as_ref()
            .ok_or_else(|| Error::Data("training cache missing fusion step".into()))?;
        let (dx, prev) = params
            .master
            .backward(fusion, &dh_master, &dc_master, &mut grads.master)?;
        dh_master = prev.h;
        dc_master = prev.c;

        let mut offset = 0;
        for (g, group) in groups.iter().enumerate() {
            let d_latch = apply_mask(&dx[offset..offset + group.hidden], &cache.latch_masks[g]);
            offset += group.hidden;
            for (c, d) in carry[g].h.iter_mut().zip(d_latch) {
                *c += d;
            }
            for update in cache.updates[g].iter().rev() {
                let (dx_sub, prev) = params.subnets[g].backward(
                    &update.cache,
                    &carry[g].h,
                    &carry[g].c,
                    &mut grads.subnets[g],
                )?;
                scatter_tokens(&mut grads, &update.tokens, &dx_sub)?;
                carry[g] = prev;
            }
        }
    }
    Ok((grads, loss * scale))
}

fn scatter_tokens(grads: &mut GradStore, tokens: &[(usize, usize)], dx: &[f64]) -> Result<()> {
    if tokens.is_empty() {
        return Ok(());
    }
    let table = grads
        .embedding
        .as_mut()
        .ok_or_else(|| Error::Config("token gradient without embedding".into()))?;
    let dim = table.dim();
    for &(at, id) in tokens {
        EmbeddingTable::accumulate(table, id, &dx[at..at + dim])?;
    }
    Ok(())
}

/// Deterministic per-(seed, stream) generator.
pub fn derived_rng(seed: u64, stream: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut word = 0u64;
    for (i, s) in stream.iter().enumerate() {
        word ^= s.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17 * (i as u32 + 1));
    }
    rng.set_stream(word);
    rng
}
