//! Training objectives with analytic gradients.
//!
//! All set-based losses take embeddings grouped by document set and return the
//! loss value together with `d loss / d embedding` in the same layout.

mod bce;
mod bench;
mod multiset;
mod pairwise;

use serde::{Deserialize, Serialize};

pub use bce::{bce_loss, bce_with_logits, sigmoid, PROB_CLAMP};
pub use bench::{bench_complexity, bench_to_csv, BenchRow};
pub use multiset::{centroid, inter_loss, intra_loss, multiset_loss, set_term, set_term_grad, EmbeddedSet};
pub use pairwise::{pairwise_loss, pairwise_triples, Triple};

use crate::error::{Error, Result};
use crate::scalar::{dot, norm, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Added to the intra/inter denominators.
    pub epsilon: f64,
    /// Floor applied to vector norms inside the cosine.
    pub norm_floor: f64,
    /// Largest cosine fed to the intra/inter terms.
    pub cosine_clamp: f64,
    /// Exclude the query itself from its own set centroid in the intra term.
    pub leave_one_out: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            epsilon: 1e-6,
            norm_floor: 1e-12,
            cosine_clamp: 1.0 - 1e-6,
            leave_one_out: false,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if self.norm_floor.is_nan() || self.norm_floor <= 0.0 {
            return Err(Error::InvalidArgument("norm_floor must be positive".into()));
        }
        if self.cosine_clamp.is_nan() || self.cosine_clamp >= 1.0 {
            return Err(Error::InvalidArgument("cosine_clamp must be below 1".into()));
        }
        Ok(())
    }
}

/// Training objective selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Pairwise,
    Multiset,
    Bce,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pairwise" => Ok(Objective::Pairwise),
            "multiset" => Ok(Objective::Multiset),
            "bce" => Ok(Objective::Bce),
            other => Err(Error::InvalidArgument(format!("unknown objective `{other}`"))),
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Objective::Pairwise => "pairwise",
            Objective::Multiset => "multiset",
            Objective::Bce => "bce",
        })
    }
}

/// Loss value with its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad<T, G> {
    pub value: T,
    pub grad: G,
}

/// `u.v / (max(|u|, floor) * max(|v|, floor))`.
pub fn cosine<T: Scalar>(u: &[T], v: &[T], norm_floor: T) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch(format!(
            "cosine of lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(dot(u, v) / (norm(u).max(norm_floor) * norm(v).max(norm_floor)))
}

/// Cosine plus its partial derivatives with respect to `u` and `v`.
pub(crate) fn cosine_grad<T: Scalar>(u: &[T], v: &[T], norm_floor: T) -> (T, Vec<T>, Vec<T>) {
    let (nu_raw, nv_raw) = (norm(u), norm(v));
    let (nu, nv) = (nu_raw.max(norm_floor), nv_raw.max(norm_floor));
    let denom = nu * nv;
    let c = dot(u, v) / denom;
    // below the floor the norm is constant, so only the numerator contributes
    let su = if nu_raw > norm_floor {
        c / (nu_raw * nu_raw)
    } else {
        T::zero()
    };
    let sv = if nv_raw > norm_floor {
        c / (nv_raw * nv_raw)
    } else {
        T::zero()
    };
    let du = u.iter().zip(v).map(|(&a, &b)| b / denom - su * a).collect();
    let dv = u.iter().zip(v).map(|(&a, &b)| a / denom - sv * b).collect();
    (c, du, dv)
}

pub(crate) fn axpy<T: Scalar>(acc: &mut [T], scale: T, x: &[T]) {
    for (a, &b) in acc.iter_mut().zip(x) {
        *a += scale * b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{finite_diff_grad, relative_error};

    #[test]
    fn cosine_examples() {
        let f = 1e-12;
        assert_eq!(cosine(&[1.0f64, 0.0], &[0.0, 1.0], f).unwrap(), 0.0);
        assert!((cosine(&[1.0f64, 1.0], &[2.0, 2.0], f).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0f64, 0.0], &[-1.0, 0.0], f).unwrap(), -1.0);
        assert!(cosine(&[1.0f64], &[1.0, 2.0], f).is_err());
    }

    #[test]
    fn zero_vector_cosine_is_finite() {
        assert_eq!(cosine(&[0.0f64, 0.0], &[1.0, 2.0], 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn cosine_gradient_matches_fd() {
        let u = [0.3f64, -1.1, 0.7];
        let v = [1.5f64, 0.2, -0.4];
        let (_, du, dv) = cosine_grad(&u, &v, 1e-12);
        let nu = finite_diff_grad(|x: &[f64]| cosine(x, &v, 1e-12).unwrap(), &u, 1e-6);
        let nv = finite_diff_grad(|x: &[f64]| cosine(&u, x, 1e-12).unwrap(), &v, 1e-6);
        assert!(relative_error(&du, &nu, 1e-12) < 1e-8);
        assert!(relative_error(&dv, &nv, 1e-12) < 1e-8);
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig::default().validate().is_ok());
        assert!(LossConfig {
            epsilon: 0.0,
            ..LossConfig::default()
        }
        .validate()
        .is_err());
        assert!(LossConfig {
            cosine_clamp: 1.0,
            ..LossConfig::default()
        }
        .validate()
        .is_err());
    }
}
