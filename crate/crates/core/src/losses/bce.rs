use super::LossGrad;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Predictions are clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]` before the logs.
pub const PROB_CLAMP: f64 = 1e-7;

pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn clamp_prob<T: Scalar>(p: T) -> (T, bool) {
    let (lo, hi) = (T::of(PROB_CLAMP), T::one() - T::of(PROB_CLAMP));
    if p < lo {
        (lo, true)
    } else if p > hi {
        (hi, true)
    } else {
        (p, false)
    }
}

fn check<T>(y: &[T], other: &[T]) -> Result<()> {
    if y.len() != other.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels vs {} predictions",
            y.len(),
            other.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::Empty("label vector".into()));
    }
    Ok(())
}

/// Mean binary cross-entropy (natural log) and its gradient with respect to the probabilities.
pub fn bce_loss<T: Scalar>(y: &[T], y_hat: &[T]) -> Result<LossGrad<T, Vec<T>>> {
    check(y, y_hat)?;
    let inv = T::one() / T::of_usize(y.len());
    let mut value = T::zero();
    let grad = y
        .iter()
        .zip(y_hat)
        .map(|(&t, &p)| {
            let (p, clamped) = clamp_prob(p);
            value -= inv * (t * p.ln() + (T::one() - t) * (T::one() - p).ln());
            if clamped {
                T::zero()
            } else {
                -inv * (t / p - (T::one() - t) / (T::one() - p))
            }
        })
        .collect();
    Ok(LossGrad { value, grad })
}

/// BCE of `sigmoid(logits)`, with the gradient taken with respect to the logits.
pub fn bce_with_logits<T: Scalar>(y: &[T], logits: &[T]) -> Result<LossGrad<T, Vec<T>>> {
    check(y, logits)?;
    let probs: Vec<T> = logits.iter().map(|&z| sigmoid(z)).collect();
    let inner = bce_loss(y, &probs)?;
    let grad = inner
        .grad
        .iter()
        .zip(&probs)
        .map(|(&g, &p)| g * p * (T::one() - p))
        .collect();
    Ok(LossGrad {
        value: inner.value,
        grad,
    })
}
