use serde::{Deserialize, Serialize};

use super::SessionInput;
use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::losses::sigmoid;
use crate::scalar::{dot, norm, Scalar};

const NORM_FLOOR: f64 = 1e-12;

/// One logistic unit per intent over the centered, L2-normalized encoder
/// output. The encoder is trained on cosine geometry only, so its output scale
/// carries no information, and an untrained encoder adds a large constant
/// offset that the fixed `center` removes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead<T> {
    n_intents: usize,
    dim: usize,
    /// `weights (n_intents x dim) | bias (n_intents)`.
    params: Vec<T>,
    center: Vec<T>,
}

impl<T: Scalar> ClassifierHead<T> {
    /// Zero weights: every probability starts at 0.5.
    pub fn zeros(n_intents: usize, dim: usize) -> Self {
        ClassifierHead {
            n_intents,
            dim,
            params: vec![T::zero(); n_intents * (dim + 1)],
            center: vec![T::zero(); dim],
        }
    }

    /// Set the center to the mean of `embeddings`.
    pub fn fit_center(&mut self, embeddings: &[Vec<T>]) {
        if embeddings.is_empty() {
            return;
        }
        let mut mean = vec![T::zero(); self.dim];
        for e in embeddings {
            for (m, &x) in mean.iter_mut().zip(e) {
                *m += x;
            }
        }
        let inv = T::one() / T::of_usize(embeddings.len());
        self.center = mean.into_iter().map(|m| m * inv).collect();
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    fn centered(&self, embedding: &[T]) -> Vec<T> {
        embedding.iter().zip(&self.center).map(|(&x, &c)| x - c).collect()
    }

    pub fn n_intents(&self) -> usize {
        self.n_intents
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn row(&self, i: usize) -> &[T] {
        &self.params[i * self.dim..(i + 1) * self.dim]
    }

    fn bias(&self, i: usize) -> T {
        self.params[self.n_intents * self.dim + i]
    }

    pub fn logits(&self, embedding: &[T]) -> Vec<T> {
        let unit = unit(&self.centered(embedding));
        (0..self.n_intents)
            .map(|i| dot(self.row(i), &unit) + self.bias(i))
            .collect()
    }

    pub fn proba(&self, embedding: &[T]) -> Vec<T> {
        self.logits(embedding).into_iter().map(sigmoid).collect()
    }

    /// Accumulate head gradients for `d loss / d logits` and return `d loss / d embedding`.
    pub fn backward(&self, embedding: &[T], grad_logits: &[T], grads: &mut [T]) -> Vec<T> {
        let x = self.centered(embedding);
        let unit = unit(&x);
        let mut grad_unit = vec![T::zero(); self.dim];
        for (i, &g) in grad_logits.iter().enumerate() {
            grads[self.n_intents * self.dim + i] += g;
            let base = i * self.dim;
            for c in 0..self.dim {
                grads[base + c] += g * unit[c];
                grad_unit[c] += g * self.params[base + c];
            }
        }
        let n = norm(&x);
        if n <= T::of(NORM_FLOOR) {
            let inv = T::one() / T::of(NORM_FLOOR);
            return grad_unit.into_iter().map(|g| g * inv).collect();
        }
        // (I - u u^T) g / |x|
        let along = dot(&unit, &grad_unit);
        grad_unit
            .iter()
            .zip(&unit)
            .map(|(&g, &u)| (g - along * u) / n)
            .collect()
    }

    pub fn to_stored(&self) -> StoredHead {
        StoredHead {
            n_intents: self.n_intents,
            dim: self.dim,
            params: self.params.iter().map(|p| p.as_f64()).collect(),
            center: self.center.iter().map(|p| p.as_f64()).collect(),
        }
    }

    pub fn from_stored(s: &StoredHead) -> Result<Self> {
        if s.params.len() != s.n_intents * (s.dim + 1) || s.center.len() != s.dim {
            return Err(Error::ShapeMismatch(format!(
                "head of {} x {} stores {} parameters",
                s.n_intents,
                s.dim,
                s.params.len()
            )));
        }
        Ok(ClassifierHead {
            n_intents: s.n_intents,
            dim: s.dim,
            params: s.params.iter().map(|&p| T::of(p)).collect(),
            center: s.center.iter().map(|&p| T::of(p)).collect(),
        })
    }
}

fn unit<T: Scalar>(x: &[T]) -> Vec<T> {
    let inv = T::one() / norm(x).max(T::of(NORM_FLOOR));
    x.iter().map(|&v| v * inv).collect()
}

/// Serialized head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredHead {
    pub n_intents: usize,
    pub dim: usize,
    pub params: Vec<f64>,
    pub center: Vec<f64>,
}

/// Per-intent probabilities for one input.
pub fn predict_proba<T: Scalar>(encoder: &EncoderParams<T>, head: &ClassifierHead<T>, input: &SessionInput) -> Vec<T> {
    head.proba(&encoder.encode_ids(&input.ids(&encoder.tokenizer())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{finite_diff_grad, relative_error};

    #[test]
    fn zero_head_gives_half() {
        let enc = EncoderParams::<f64>::new(64, 8, 8, 1);
        let head = ClassifierHead::zeros(5, 8);
        assert_eq!(
            predict_proba(&enc, &head, &SessionInput::query("flu shot")),
            vec![0.5; 5]
        );
    }

    #[test]
    fn backward_matches_fd() {
        let mut head = ClassifierHead::<f64>::zeros(3, 4);
        head.fit_center(&[vec![0.1, 0.0, 0.2, -0.3], vec![0.0, 0.1, 0.0, 0.1]]);
        for (i, p) in head.params_mut().iter_mut().enumerate() {
            *p = ((i * 37 % 11) as f64 - 5.0) / 7.0;
        }
        let x = [0.3, -0.2, 0.9, 0.1];
        let g = [0.5, -1.0, 0.25];
        let loss = |h: &ClassifierHead<f64>, x: &[f64]| h.logits(x).iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        let mut grads = vec![0.0; head.params().len()];
        let gx = head.backward(&x, &g, &mut grads);
        let nx = finite_diff_grad(|x: &[f64]| loss(&head, x), &x, 1e-6);
        let np = finite_diff_grad(
            |p: &[f64]| {
                let mut h = head.clone();
                h.params_mut().copy_from_slice(p);
                loss(&h, &x)
            },
            head.params(),
            1e-6,
        );
        assert!(relative_error(&gx, &nx, 1e-12) < 1e-8);
        assert!(relative_error(&grads, &np, 1e-12) < 1e-8);
    }

    #[test]
    fn stored_round_trip() {
        let mut head = ClassifierHead::<f64>::zeros(2, 3);
        head.params_mut()[4] = 0.125;
        assert_eq!(ClassifierHead::from_stored(&head.to_stored()).unwrap(), head);
        let mut bad = head.to_stored();
        bad.params.pop();
        assert!(ClassifierHead::<f64>::from_stored(&bad).is_err());
    }
}
