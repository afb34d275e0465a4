//! Intra-set, inter-set and multiset losses over query/centroid cosines.
//!
//! For a cosine `c` the per-query term is `1 / (1 - exp(c) / e + epsilon)`, with
//! `c` clamped from above at `cosine_clamp`. The term grows as `c -> 1`, so
//! `-ln(intra / inter)` is minimized by tight sets that sit far from the other
//! sets' centroids.

use super::{axpy, cosine_grad, LossConfig, LossGrad};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Embeddings and click weights of one document set.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSet<T> {
    pub embeddings: Vec<Vec<T>>,
    pub weights: Vec<T>,
}

impl<T: Scalar> EmbeddedSet<T> {
    pub fn new(embeddings: Vec<Vec<T>>, weights: Vec<T>) -> Self {
        EmbeddedSet { embeddings, weights }
    }

    /// Equal weights summing to one.
    pub fn uniform(embeddings: Vec<Vec<T>>) -> Self {
        let w = T::one() / T::of_usize(embeddings.len().max(1));
        let weights = vec![w; embeddings.len()];
        EmbeddedSet { embeddings, weights }
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    fn zeros_like(&self) -> Vec<Vec<T>> {
        self.embeddings.iter().map(|e| vec![T::zero(); e.len()]).collect()
    }
}

/// Arithmetic mean of the set's embeddings.
pub fn centroid<T: Scalar>(embeddings: &[Vec<T>]) -> Vec<T> {
    let d = embeddings.first().map_or(0, Vec::len);
    let mut c = vec![T::zero(); d];
    for e in embeddings {
        axpy(&mut c, T::one(), e);
    }
    let inv = T::one() / T::of_usize(embeddings.len().max(1));
    c.iter_mut().for_each(|x| *x *= inv);
    c
}

/// `1 / (1 - exp(min(c, clamp)) / e + epsilon)`.
pub fn set_term<T: Scalar>(cos: T, cfg: &LossConfig) -> T {
    let c = cos.min(T::of(cfg.cosine_clamp));
    T::one() / (T::one() - (c - T::one()).exp() + T::of(cfg.epsilon))
}

/// Derivative of [`set_term`] with respect to the cosine (zero once clamped).
pub fn set_term_grad<T: Scalar>(cos: T, cfg: &LossConfig) -> T {
    if cos >= T::of(cfg.cosine_clamp) {
        return T::zero();
    }
    let ex = (cos - T::one()).exp();
    let den = T::one() - ex + T::of(cfg.epsilon);
    ex / (den * den)
}

fn check_shapes<T: Scalar>(sets: &[EmbeddedSet<T>]) -> Result<usize> {
    let d = sets
        .iter()
        .flat_map(|s| s.embeddings.first())
        .map(Vec::len)
        .next()
        .ok_or_else(|| Error::Empty("no embeddings".into()))?;
    for (i, s) in sets.iter().enumerate() {
        if s.embeddings.len() != s.weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "set {i}: {} embeddings, {} weights",
                s.len(),
                s.weights.len()
            )));
        }
        if s.is_empty() {
            return Err(Error::Empty(format!("set {i} has no members")));
        }
        if s.embeddings.iter().any(|e| e.len() != d) {
            return Err(Error::ShapeMismatch(format!("set {i} mixes embedding sizes")));
        }
    }
    Ok(d)
}

/// Accumulates `d term / d cos` contributions for one query against one centroid.
fn add_term<T: Scalar>(
    query: &[T],
    center: &[T],
    scale: T,
    cfg: &LossConfig,
    grad_query: &mut [T],
    grad_center: &mut [T],
) -> T {
    let (c, du, dv) = cosine_grad(query, center, T::of(cfg.norm_floor));
    let g = scale * set_term_grad(c, cfg);
    if g != T::zero() {
        axpy(grad_query, g, &du);
        axpy(grad_center, g, &dv);
    }
    scale * set_term(c, cfg)
}

/// `sum_i 1/N_i sum_j w_ij term(cos(E_ij, C_i))`.
pub fn intra_loss<T: Scalar>(sets: &[EmbeddedSet<T>], cfg: &LossConfig) -> Result<LossGrad<T, Vec<Vec<Vec<T>>>>> {
    let d = check_shapes(sets)?;
    if let Some(i) = sets.iter().position(|s| s.len() < 2) {
        return Err(Error::InvalidArgument(format!(
            "set {i} is a singleton; intra loss needs two or more members"
        )));
    }
    let mut value = T::zero();
    let mut grads: Vec<Vec<Vec<T>>> = sets.iter().map(EmbeddedSet::zeros_like).collect();
    for (set, grad) in sets.iter().zip(&mut grads) {
        let n = set.len();
        let inv_n = T::one() / T::of_usize(n);
        let full = centroid(&set.embeddings);
        if cfg.leave_one_out {
            let inv_rest = T::one() / T::of_usize(n - 1);
            let mut center_grads = Vec::with_capacity(n);
            let mut center_total = vec![T::zero(); d];
            for (j, (e, &w)) in set.embeddings.iter().zip(&set.weights).enumerate() {
                let center: Vec<T> = full
                    .iter()
                    .zip(e)
                    .map(|(&c, &x)| (c * T::of_usize(n) - x) * inv_rest)
                    .collect();
                let mut gc = vec![T::zero(); d];
                value += add_term(e, &center, w * inv_n, cfg, &mut grad[j], &mut gc);
                axpy(&mut center_total, T::one(), &gc);
                center_grads.push(gc);
            }
            for (j, gc) in center_grads.iter().enumerate() {
                for ((g, &tot), &own) in grad[j].iter_mut().zip(&center_total).zip(gc) {
                    *g += (tot - own) * inv_rest;
                }
            }
        } else {
            let mut gc = vec![T::zero(); d];
            for (j, (e, &w)) in set.embeddings.iter().zip(&set.weights).enumerate() {
                value += add_term(e, &full, w * inv_n, cfg, &mut grad[j], &mut gc);
            }
            for g in grad.iter_mut() {
                axpy(g, inv_n, &gc);
            }
        }
    }
    Ok(LossGrad { value, grad: grads })
}

/// `sum_i sum_{j != i} 1/N_i sum_k w_ik term(cos(E_ik, C_j))`.
pub fn inter_loss<T: Scalar>(sets: &[EmbeddedSet<T>], cfg: &LossConfig) -> Result<LossGrad<T, Vec<Vec<Vec<T>>>>> {
    let d = check_shapes(sets)?;
    if sets.len() < 2 {
        return Err(Error::InvalidArgument("inter loss needs at least two sets".into()));
    }
    let centroids: Vec<Vec<T>> = sets.iter().map(|s| centroid(&s.embeddings)).collect();
    let mut center_grads = vec![vec![T::zero(); d]; sets.len()];
    let mut grads: Vec<Vec<Vec<T>>> = sets.iter().map(EmbeddedSet::zeros_like).collect();
    let mut value = T::zero();
    for (i, set) in sets.iter().enumerate() {
        let inv_n = T::one() / T::of_usize(set.len());
        for (j, center) in centroids.iter().enumerate() {
            if j == i {
                continue;
            }
            for (k, (e, &w)) in set.embeddings.iter().zip(&set.weights).enumerate() {
                value += add_term(e, center, w * inv_n, cfg, &mut grads[i][k], &mut center_grads[j]);
            }
        }
    }
    for (j, set) in sets.iter().enumerate() {
        let inv_n = T::one() / T::of_usize(set.len());
        for g in grads[j].iter_mut() {
            axpy(g, inv_n, &center_grads[j]);
        }
    }
    Ok(LossGrad { value, grad: grads })
}

/// `-ln(intra / inter)`.
pub fn multiset_loss<T: Scalar>(sets: &[EmbeddedSet<T>], cfg: &LossConfig) -> Result<LossGrad<T, Vec<Vec<Vec<T>>>>> {
    let intra = intra_loss(sets, cfg)?;
    let inter = inter_loss(sets, cfg)?;
    assert!(
        intra.value > T::zero() && inter.value > T::zero(),
        "intra/inter terms are positive for epsilon > 0 and clamped cosines"
    );
    let value = -(intra.value / inter.value).ln();
    let (a, b) = (T::one() / inter.value, T::one() / intra.value);
    let grad = inter
        .grad
        .iter()
        .zip(&intra.grad)
        .map(|(gi, ga)| {
            gi.iter()
                .zip(ga)
                .map(|(x, y)| x.iter().zip(y).map(|(&p, &q)| a * p - b * q).collect())
                .collect()
        })
        .collect();
    Ok(LossGrad { value, grad })
}
