mod common;

use common::{oracle_onsets, oracle_pauses, random_labels};
use rand::Rng;
use turntake::corpus::Speaker;
use turntake::eval::{
    find_onsets, find_pauses, pause_candidates, score_pause, OnsetClass, PauseEvent, PredictionTrack,
};
use turntake::multiscale::derived_rng;
use turntake::nn::HORIZON;

#[test]
fn event_extraction_matches_frame_scan_oracle() {
    let mut counts = [0usize; 4];
    for seed in 0..100 {
        let mut rng = derived_rng(seed, &[11]);
        let n = rng.random_range(200..1200);
        let a = random_labels(&mut rng, n);
        let b = random_labels(&mut rng, n);
        for min in [1, 10] {
            let got = find_pauses([&a, &b], min);
            assert_eq!(got, oracle_pauses(&a, &b, min), "seed {seed} min {min}");
            counts[if min == 1 { 0 } else { 1 }] += got.len();
        }
        let onsets = find_onsets([&a, &b]);
        assert_eq!(onsets, oracle_onsets(&a, &b), "seed {seed}");
        counts[2] += onsets.iter().filter(|e| e.class == OnsetClass::Short).count();
        counts[3] += onsets.iter().filter(|e| e.class == OnsetClass::Long).count();
    }
    assert!(counts.iter().all(|&c| c >= 10), "degenerate sweep {counts:?}");
}

#[test]
fn long_pauses_are_a_subset_of_short_pause_regions() {
    for seed in 0..100 {
        let mut rng = derived_rng(seed, &[12]);
        let a = random_labels(&mut rng, 800);
        let b = random_labels(&mut rng, 800);
        let candidates = pause_candidates([&a, &b]);
        for e in find_pauses([&a, &b], 10) {
            assert!(candidates
                .iter()
                .any(|c| c.silence_frames >= 10 && c.start_frame + 9 == e.decision_frame && c.holder == e.holder));
        }
    }
}

#[test]
fn pause_scoring_ignores_common_affine_maps() {
    let mut rng = derived_rng(5, &[]);
    for _ in 0..200 {
        let a: Vec<Vec<f64>> = (0..4).map(|_| (0..HORIZON).map(|_| rng.random::<f64>()).collect()).collect();
        let b: Vec<Vec<f64>> = (0..4).map(|_| (0..HORIZON).map(|_| rng.random::<f64>()).collect()).collect();
        let scale = rng.random_range(0.1..1.0);
        let shift = rng.random_range(0.0..(1.0 - scale));
        let map = |v: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            v.iter().map(|r| r.iter().map(|x| shift + scale * x).collect()).collect()
        };
        let t = PredictionTrack::new(a.clone(), b.clone()).unwrap();
        let u = PredictionTrack::new(map(&a), map(&b)).unwrap();
        for holder in Speaker::BOTH {
            let e = PauseEvent {
                decision_frame: 2,
                holder,
                continuer: holder,
            };
            assert_eq!(score_pause(&t, &e).unwrap(), score_pause(&u, &e).unwrap());
        }
    }
}

#[test]
fn hand_computed_pause_winner() {
    let mut a = vec![0.0; HORIZON];
    let mut b = vec![0.0; HORIZON];
    for j in 0..20 {
        a[j] = j as f64 / 40.0; // mean 0.2375
        b[j] = if j % 2 == 0 { 0.5 } else { 0.0 }; // mean 0.25
    }
    let t = PredictionTrack::new(vec![a], vec![b]).unwrap();
    let e = PauseEvent {
        decision_frame: 0,
        holder: Speaker::A,
        continuer: Speaker::A,
    };
    assert_eq!(score_pause(&t, &e).unwrap(), turntake::eval::PauseOutcome::Shift);
}
