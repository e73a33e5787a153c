use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ClassScore<C> {
    pub class: C,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True instances of the class.
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FScoreReport<C> {
    pub classes: Vec<ClassScore<C>>,
    /// Per-class F1 weighted by true-class prevalence.
    pub weighted_f1: f64,
    pub n_events: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn fscore<C: Ord + Copy>(truth: &[C], predicted: &[C]) -> Result<FScoreReport<C>> {
    if truth.len() != predicted.len() {
        return Err(Error::Dimension {
            context: "predictions".into(),
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Data("F-score of an empty event list".into()));
    }
    // (true, predicted, correct) counts
    let mut counts: BTreeMap<C, (usize, usize, usize)> = BTreeMap::new();
    for (&t, &p) in truth.iter().zip(predicted) {
        counts.entry(t).or_default().0 += 1;
        counts.entry(p).or_default().1 += 1;
        if t == p {
            counts.entry(t).or_default().2 += 1;
        }
    }
    let n = truth.len();
    let classes: Vec<ClassScore<C>> = counts
        .into_iter()
        .map(|(class, (support, pred, hit))| {
            let precision = ratio(hit, pred);
            let recall = ratio(hit, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassScore {
                class,
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let weighted_f1 = classes.iter().map(|c| c.support as f64 / n as f64 * c.f1).sum();
    Ok(FScoreReport {
        classes,
        weighted_f1,
        n_events: n,
    })
}

/// Most frequent true class; ties go to the smallest class.
pub fn majority_class<C: Ord + Copy>(truth: &[C]) -> Result<C> {
    let mut counts: BTreeMap<C, usize> = BTreeMap::new();
    for &t in truth {
        *counts.entry(t).or_default() += 1;
    }
    let top = counts.values().copied().max().ok_or_else(|| Error::Data("majority of an empty event list".into()))?;
    Ok(*counts.iter().find(|(_, &c)| c == top).expect("max exists").0)
}

/// Scores predicting the majority class for every event.
pub fn majority_baseline<C: Ord + Copy>(truth: &[C]) -> Result<FScoreReport<C>> {
    let m = majority_class(truth)?;
    fscore(truth, &vec![m; truth.len()])
}
