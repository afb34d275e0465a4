use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::LabelVector;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Candidate thresholds 0.05, 0.10, ..., 0.95.
pub fn threshold_grid() -> impl Iterator<Item = f64> {
    (1..20).map(|i| i as f64 / 20.0)
}

/// Per-intent decision thresholds; intent `i` is predicted when `p_i >= tau_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdVector(pub Vec<f64>);

impl ThresholdVector {
    pub fn uniform(n: usize) -> Self {
        ThresholdVector(vec![DEFAULT_THRESHOLD; n])
    }

    pub fn decide(&self, probs: &[f64]) -> LabelVector {
        LabelVector(probs.iter().zip(&self.0).map(|(p, t)| p >= t).collect())
    }
}

fn f1_at(scores: &[f64], truth: &[bool], tau: f64) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&s, &t) in scores.iter().zip(truth) {
        match (s >= tau, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// For each intent, the grid threshold with the best F1 on the given scores;
/// ties go to the lower threshold. Intents with no positive example keep 0.5.
pub fn select_thresholds(scores: &[Vec<f64>], truth: &[LabelVector]) -> Result<ThresholdVector> {
    if scores.is_empty() || scores.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} score rows for {} truths",
            scores.len(),
            truth.len()
        )));
    }
    let width = truth[0].len();
    if scores.iter().any(|s| s.len() != width) || truth.iter().any(|t| t.len() != width) {
        return Err(Error::ShapeMismatch("inconsistent label width".into()));
    }
    let mut taus = Vec::with_capacity(width);
    for i in 0..width {
        let col: Vec<f64> = scores.iter().map(|s| s[i]).collect();
        let labels: Vec<bool> = truth.iter().map(|t| t.0[i]).collect();
        if !labels.iter().any(|&b| b) {
            log::warn!("intent {i} has no positive validation example; threshold left at {DEFAULT_THRESHOLD}");
            taus.push(DEFAULT_THRESHOLD);
            continue;
        }
        let mut best = (f64::NEG_INFINITY, DEFAULT_THRESHOLD);
        for tau in threshold_grid() {
            let f = f1_at(&col, &labels, tau);
            if f > best.0 {
                best = (f, tau);
            }
        }
        taus.push(best.1);
    }
    Ok(ThresholdVector(taus))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_scores_pick_lowest_perfect_threshold() {
        let scores = vec![vec![0.9], vec![0.95], vec![0.1], vec![0.05]];
        let truth: Vec<_> = [true, true, false, false]
            .iter()
            .map(|&b| LabelVector(vec![b]))
            .collect();
        assert_eq!(select_thresholds(&scores, &truth).unwrap().0, vec![0.15]);
    }

    #[test]
    fn all_negative_label_defaults() {
        let scores = vec![vec![0.3, 0.7], vec![0.6, 0.2]];
        let truth = vec![LabelVector(vec![false, true]), LabelVector(vec![false, false])];
        let t = select_thresholds(&scores, &truth).unwrap();
        assert_eq!(t.0[0], 0.5);
    }

    #[test]
    fn decide_is_monotone() {
        let t = ThresholdVector(vec![0.3, 0.6]);
        assert_eq!(t.decide(&[0.3, 0.59]), LabelVector(vec![true, false]));
    }

    #[test]
    fn grid_has_nineteen_points() {
        let g: Vec<f64> = threshold_grid().collect();
        assert_eq!(g.len(), 19);
        assert_eq!((g[0], g[18]), (0.05, 0.95));
    }
}
