use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::LabelVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    #[default]
    Micro,
    Macro,
}

impl std::str::FromStr for Averaging {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "micro" => Ok(Averaging::Micro),
            "macro" => Ok(Averaging::Macro),
            other => Err(Error::InvalidArgument(format!("unknown averaging `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Counts {
    fn scores(self) -> PrfScores {
        let precision = if self.tp + self.fp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        };
        let recall = if self.tp + self.fn_ == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        PrfScores { precision, recall, f1 }
    }
}

fn check_shapes<A, B>(
    pred: &[A],
    truth: &[B],
    len_a: impl Fn(&A) -> usize,
    len_b: impl Fn(&B) -> usize,
) -> Result<usize> {
    if pred.is_empty() {
        return Err(Error::Empty("no samples to score".into()));
    }
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} truths",
            pred.len(),
            truth.len()
        )));
    }
    let width = len_b(&truth[0]);
    for (i, (p, t)) in pred.iter().zip(truth).enumerate() {
        if len_a(p) != width || len_b(t) != width {
            return Err(Error::ShapeMismatch(format!(
                "sample {i} has label width {} / {}, expected {width}",
                len_a(p),
                len_b(t)
            )));
        }
    }
    Ok(width)
}

/// Precision, recall and F1 of decided label sets. Micro pools TP/FP/FN over every
/// (sample, label) pair; macro averages the per-label scores.
pub fn precision_f1(pred: &[LabelVector], truth: &[LabelVector], averaging: Averaging) -> Result<PrfScores> {
    let width = check_shapes(pred, truth, |p| p.len(), |t| t.len())?;
    let mut per_label = vec![Counts::default(); width];
    for (p, t) in pred.iter().zip(truth) {
        for (c, (&yp, &yt)) in per_label.iter_mut().zip(p.0.iter().zip(&t.0)) {
            match (yp, yt) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => {}
            }
        }
    }
    let pooled = per_label.iter().fold(Counts::default(), |acc, c| Counts {
        tp: acc.tp + c.tp,
        fp: acc.fp + c.fp,
        fn_: acc.fn_ + c.fn_,
    });
    if pooled.tp + pooled.fp == 0 {
        log::warn!("no positive predictions; precision reported as 0");
    }
    Ok(match averaging {
        Averaging::Micro => pooled.scores(),
        Averaging::Macro => {
            let scores: Vec<PrfScores> = per_label.iter().map(|c| c.scores()).collect();
            let n = scores.len() as f64;
            PrfScores {
                precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
                recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
                f1: scores.iter().map(|s| s.f1).sum::<f64>() / n,
            }
        }
    })
}

/// Label indices ordered by descending score; ties keep the lower index first.
pub fn rank_labels<T: Scalar>(scores: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal));
    order
}

/// Fraction of samples with at least one true label among the top `k` scores.
pub fn hit_rate_at<T: Scalar>(scores: &[Vec<T>], truth: &[LabelVector], k: usize) -> Result<f64> {
    check_shapes(scores, truth, |s| s.len(), |t| t.len())?;
    let hits = scores
        .iter()
        .zip(truth)
        .filter(|(s, t)| rank_labels(s).into_iter().take(k).any(|i| t.0[i]))
        .count();
    Ok(hits as f64 / scores.len() as f64)
}

pub fn hit_rate_3<T: Scalar>(scores: &[Vec<T>], truth: &[LabelVector]) -> Result<f64> {
    hit_rate_at(scores, truth, 3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NdcgScore {
    pub value: f64,
    /// Samples without any relevant label, left out of the mean.
    pub excluded: usize,
}

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

/// Mean NDCG@k with binary relevance taken from the truth vectors.
pub fn ndcg_at<T: Scalar>(scores: &[Vec<T>], truth: &[LabelVector], k: usize) -> Result<NdcgScore> {
    check_shapes(scores, truth, |s| s.len(), |t| t.len())?;
    let mut total = 0.0;
    let mut counted = 0;
    for (s, t) in scores.iter().zip(truth) {
        let relevant = t.0.iter().filter(|&&b| b).count();
        if relevant == 0 {
            continue;
        }
        let dcg: f64 = rank_labels(s)
            .into_iter()
            .take(k)
            .enumerate()
            .filter(|&(_, i)| t.0[i])
            .map(|(r, _)| discount(r + 1))
            .sum();
        let idcg: f64 = (1..=relevant.min(k)).map(discount).sum();
        total += dcg / idcg;
        counted += 1;
    }
    let excluded = scores.len() - counted;
    if excluded > 0 {
        log::warn!("{excluded} samples without relevant labels excluded from NDCG");
    }
    Ok(NdcgScore {
        value: if counted == 0 { 0.0 } else { total / counted as f64 },
        excluded,
    })
}

pub fn ndcg_3<T: Scalar>(scores: &[Vec<T>], truth: &[LabelVector]) -> Result<NdcgScore> {
    ndcg_at(scores, truth, 3)
}
