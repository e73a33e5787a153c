//! Reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use turntake::corpus::Speaker;
use turntake::eval::{OnsetClass, OnsetEvent, PauseEvent};
use turntake::multiscale::{
    run_sequence, Arrangement, InputKind, ModalityConfig, NetworkConfig, NetworkParams, Payload, RunMode,
    SequenceInputs, TimedInput, Timescale,
};
use turntake::nn::{Matrix, HORIZON};

// Independent scalar LSTM cell for the stacked-network oracle.
pub fn oracle_cell(w: &Matrix, u: &Matrix, b: &Matrix, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hd = h.len();
    let act = |row: usize| -> f64 {
        let mut s = b.get(row, 0);
        for (k, xv) in x.iter().enumerate() {
            s += w.get(row, k) * xv;
        }
        for (k, hv) in h.iter().enumerate() {
            s += u.get(row, k) * hv;
        }
        s
    };
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let mut h2 = vec![0.0; hd];
    let mut c2 = vec![0.0; hd];
    for j in 0..hd {
        let i = sig(act(j));
        let f = sig(act(hd + j));
        let g = act(2 * hd + j).tanh();
        let o = sig(act(3 * hd + j));
        c2[j] = f * c[j] + i * g;
        h2[j] = o * c2[j].tanh();
    }
    (h2, c2)
}

/// Runs a one-subnet network on 50ms inputs and an explicit two-layer
/// stacked LSTM with the same weights; returns the largest output gap.
pub fn stacked_oracle_max_diff(seed: u64, steps: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = NetworkConfig {
        arrangement: Arrangement::OneSubnet,
        modalities: vec![
            dense("a", 3, Timescale::regular(50.0), 6),
            dense("b", 2, Timescale::regular(50.0), 6),
        ],
        master_hidden: 7,
        dropout_p: 0.0,
        l2_lambda: 0.0,
        hidden_budget_check: true,
        embedding: None,
    };
    let params = NetworkParams::new(&cfg, &mut rng).unwrap();
    let mut regular = |dim: usize| -> Vec<TimedInput> {
        (1..=steps)
            .map(|k| TimedInput::dense(k as f64 * 0.05, (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect()
    };
    let inputs = SequenceInputs {
        duration_s: steps as f64 * 0.05,
        streams: vec![regular(3), regular(2)],
    };
    let (track, _) = run_sequence(&params, &cfg, &inputs, steps, &mut RunMode::Eval).unwrap();

    let (l1, l2) = (&params.subnets[0], &params.master);
    let (mut h1, mut c1) = (vec![0.0; 6], vec![0.0; 6]);
    let (mut h2, mut c2) = (vec![0.0; 7], vec![0.0; 7]);
    let mut worst: f64 = 0.0;
    for t in 0..steps {
        let mut x = Vec::new();
        for s in &inputs.streams {
            if let Payload::Dense(v) = &s[t].features {
                x.extend(v);
            }
        }
        (h1, c1) = oracle_cell(&l1.w, &l1.u, &l1.b, &x, &h1, &c1);
        (h2, c2) = oracle_cell(&l2.w, &l2.u, &l2.b, &h1, &h2, &c2);
        for j in 0..HORIZON {
            let mut z = params.head.b.get(j, 0);
            for k in 0..7 {
                z += params.head.w.get(j, k) * h2[k];
            }
            let y = 1.0 / (1.0 + (-z).exp());
            worst = worst.max((y - track[t][j]).abs());
        }
    }
    worst
}

fn dense(name: &str, dim: usize, ts: Timescale, hidden: usize) -> ModalityConfig {
    ModalityConfig {
        name: name.into(),
        input: InputKind::Dense { dim },
        timescale: ts,
        subnet_hidden: hidden,
    }
}

/// Alternating silence/speech runs with lengths spanning every rule boundary.
pub fn random_labels(rng: &mut impl Rng, n: usize) -> Vec<bool> {
    let mut v = Vec::with_capacity(n);
    let mut on = rng.random::<bool>();
    while v.len() < n {
        let len = match rng.random_range(0..4) {
            0 => rng.random_range(1..12),
            1 => rng.random_range(8..25),
            2 => rng.random_range(25..70),
            _ => rng.random_range(90..130),
        };
        v.extend(std::iter::repeat_n(on, len));
        on = !on;
    }
    v.truncate(n);
    v
}

/// Checks every frame as a possible decision point.
pub fn oracle_pauses(a: &[bool], b: &[bool], min: usize) -> Vec<PauseEvent> {
    let n = a.len();
    let lab = |sp: usize, k: usize| if sp == 0 { a[k] } else { b[k] };
    let mut out = Vec::new();
    for d in 0..n {
        if d < min || d + 20 >= n {
            continue;
        }
        let first = d + 1 - min;
        let before = first - 1;
        let quiet = (first..=d).all(|k| !a[k] && !b[k]);
        let speakers_before = [a[before], b[before]];
        if !quiet || speakers_before.iter().filter(|&&x| x).count() != 1 {
            continue;
        }
        let holder = if a[before] { 0 } else { 1 };
        let resumed: Vec<usize> = (0..2).filter(|&sp| (d + 1..=d + 20).any(|k| lab(sp, k))).collect();
        if resumed.len() == 1 {
            out.push(PauseEvent {
                decision_frame: d,
                holder: Speaker::BOTH[holder],
                continuer: Speaker::BOTH[resumed[0]],
            });
        }
    }
    out
}

pub fn oracle_onsets(a: &[bool], b: &[bool]) -> Vec<OnsetEvent> {
    let mut out = Vec::new();
    for (sp, l) in [a, b].into_iter().enumerate() {
        let n = l.len();
        for s in 30..n {
            if !l[s] || l[s - 30..s].contains(&true) {
                continue;
            }
            let mut end = s;
            while end < n && l[end] {
                end += 1;
            }
            let len = end - s;
            let quiet_after = end < n && end + 100 <= n && !l[end..end + 100].contains(&true);
            let class = if len >= 50 {
                OnsetClass::Long
            } else if len <= 20 && quiet_after {
                OnsetClass::Short
            } else {
                continue;
            };
            if len >= 10 {
                out.push(OnsetEvent {
                    speaker: Speaker::BOTH[sp],
                    start_frame: s,
                    length_frames: len,
                    class,
                });
            }
        }
    }
    out
}
