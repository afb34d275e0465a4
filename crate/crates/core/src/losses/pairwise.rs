use rand::Rng;

use super::{axpy, cosine_grad, LossGrad};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Indices of an anchor, a co-click positive and a negative into an embedding list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triple {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

fn soft(x: f64) -> f64 {
    1.0 / (1.0 + x.exp())
}

/// `sum [1/(1+exp(cos(a, p))) - 1/(1+exp(cos(a, n)))]` over the triples, with the
/// gradient for every embedding.
pub fn pairwise_loss<T: Scalar>(
    embeddings: &[Vec<T>],
    triples: &[Triple],
    norm_floor: T,
) -> Result<LossGrad<T, Vec<Vec<T>>>> {
    if triples.is_empty() {
        return Err(Error::Empty("pairwise loss needs at least one triple".into()));
    }
    let n = embeddings.len();
    if let Some(t) = triples
        .iter()
        .find(|t| t.anchor >= n || t.positive >= n || t.negative >= n)
    {
        return Err(Error::ShapeMismatch(format!(
            "triple {t:?} indexes past {n} embeddings"
        )));
    }
    let mut grad: Vec<Vec<T>> = embeddings.iter().map(|e| vec![T::zero(); e.len()]).collect();
    let mut value = T::zero();
    for t in triples {
        for (other, sign) in [(t.positive, T::one()), (t.negative, -T::one())] {
            let (c, du, dv) = cosine_grad(&embeddings[t.anchor], &embeddings[other], norm_floor);
            let s = T::of(soft(c.as_f64()));
            value += sign * s;
            // d/dx 1/(1+e^x) = -s (1 - s)
            let g = -sign * s * (T::one() - s);
            axpy(&mut grad[t.anchor], g, &du);
            axpy(&mut grad[other], g, &dv);
        }
    }
    Ok(LossGrad { value, grad })
}

/// Every unordered co-click pair `(a, p)`, `a < p`, within a group, each with one
/// negative drawn uniformly from the other groups. `groups[i]` is the group of
/// embedding `i`.
pub fn pairwise_triples<R: Rng + ?Sized>(groups: &[usize], rng: &mut R) -> Vec<Triple> {
    let mut triples = Vec::new();
    for a in 0..groups.len() {
        if groups.iter().all(|&g| g == groups[a]) {
            continue;
        }
        for p in a + 1..groups.len() {
            if groups[a] != groups[p] {
                continue;
            }
            let negative = loop {
                let cand = rng.gen_range(0..groups.len());
                if groups[cand] != groups[a] {
                    break cand;
                }
            };
            triples.push(Triple {
                anchor: a,
                positive: p,
                negative,
            });
        }
    }
    triples
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn extreme_cosines() {
        let e = vec![vec![1.0f64, 0.0], vec![2.0, 0.0], vec![-1.0, 0.0]];
        let t = [Triple {
            anchor: 0,
            positive: 1,
            negative: 2,
        }];
        let v = pairwise_loss(&e, &t, 1e-12).unwrap().value;
        // 1/(1+e) - 1/(1+1/e)
        assert!((v + 0.462_117).abs() < 1e-6, "{v}");
    }

    #[test]
    fn equal_cosines_cancel() {
        let e = vec![vec![1.0f64, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let t = [Triple {
            anchor: 0,
            positive: 1,
            negative: 2,
        }];
        assert_eq!(pairwise_loss(&e, &t, 1e-12).unwrap().value, 0.0);
    }

    #[test]
    fn empty_batch_rejected() {
        assert!(pairwise_loss::<f64>(&[vec![1.0]], &[], 1e-12).is_err());
    }

    #[test]
    fn descent_pulls_positive_in_and_pushes_negative_out() {
        let mut anchor = vec![0.1f64, 1.0];
        let (pos, neg) = (vec![1.0f64, 0.0], vec![-1.0, 0.0]);
        let t = [Triple {
            anchor: 0,
            positive: 1,
            negative: 2,
        }];
        let cos = |a: &[f64], b: &[f64]| super::super::cosine(a, b, 1e-12).unwrap();
        let (first_pos, first_neg) = (cos(&anchor, &pos), cos(&anchor, &neg));
        let (mut last_pos, mut last_neg) = (first_pos, first_neg);
        for _ in 0..50 {
            let e = vec![anchor.clone(), pos.clone(), neg.clone()];
            let g = pairwise_loss(&e, &t, 1e-12).unwrap().grad;
            anchor.iter_mut().zip(&g[0]).for_each(|(x, d)| *x -= 0.2 * d);
            let (cp, cn) = (cos(&anchor, &pos), cos(&anchor, &neg));
            assert!(cp > last_pos && cn < last_neg);
            (last_pos, last_neg) = (cp, cn);
        }
        assert!(last_pos > first_pos + 0.2 && last_neg < first_neg - 0.2);
    }

    #[test]
    fn triples_cover_all_pairs() {
        let groups = [0, 0, 0, 1, 1, 2];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = pairwise_triples(&groups, &mut rng);
        assert_eq!(t.len(), 3 + 1);
        for tr in &t {
            assert_eq!(groups[tr.anchor], groups[tr.positive]);
            assert_ne!(groups[tr.anchor], groups[tr.negative]);
        }
    }
}
