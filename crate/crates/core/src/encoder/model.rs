use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Tokenizer;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Half-width of the uniform initialization interval.
pub const INIT_SCALE: f64 = 0.05;

/// Flat parameter vector laid out as
/// `token_table (V x d) | w1 (h x d) | b1 (h) | w2 (d x h) | b2 (d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T> {
    vocab: usize,
    dim: usize,
    hidden: usize,
    seed: u64,
    data: Vec<T>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Forward<T> {
    pub ids: Vec<usize>,
    pub pooled: Vec<T>,
    pub hidden: Vec<T>,
    pub out: Vec<T>,
}

impl<T: Scalar> EncoderParams<T> {
    fn param_count(vocab: usize, dim: usize, hidden: usize) -> usize {
        vocab * dim + 2 * hidden * dim + hidden + dim
    }

    /// Uniform initialization in `[-INIT_SCALE, INIT_SCALE]` from `seed`.
    pub fn new(vocab: usize, dim: usize, hidden: usize, seed: u64) -> Self {
        assert!(dim >= 2, "embedding dimension must be at least 2");
        assert!(hidden >= 1 && vocab >= 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..Self::param_count(vocab, dim, hidden))
            .map(|_| T::of(rng.gen_range(-INIT_SCALE..=INIT_SCALE)))
            .collect();
        EncoderParams {
            vocab,
            dim,
            hidden,
            seed,
            data,
        }
    }

    pub fn from_flat(vocab: usize, dim: usize, hidden: usize, seed: u64, data: Vec<T>) -> Result<Self> {
        let expected = Self::param_count(vocab, dim, hidden);
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "expected {expected} parameters, got {}",
                data.len()
            )));
        }
        if dim < 2 {
            return Err(Error::InvalidArgument("embedding dimension must be at least 2".into()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        Ok(EncoderParams {
            vocab,
            dim,
            hidden,
            seed,
            data,
        })
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tokenizer(&self) -> Tokenizer {
        Tokenizer::new(self.vocab)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn zeros_like(&self) -> Vec<T> {
        vec![T::zero(); self.data.len()]
    }

    fn offsets(&self) -> [usize; 5] {
        let (v, d, h) = (self.vocab, self.dim, self.hidden);
        let w1 = v * d;
        let b1 = w1 + h * d;
        let w2 = b1 + h;
        let b2 = w2 + d * h;
        [0, w1, b1, w2, b2]
    }

    pub fn token_table_mut(&mut self) -> &mut [T] {
        let end = self.vocab * self.dim;
        &mut self.data[..end]
    }

    pub fn forward(&self, ids: &[usize]) -> Forward<T> {
        let (d, h) = (self.dim, self.hidden);
        let [_, w1, b1, w2, b2] = self.offsets();
        let inv_n = T::one() / T::of_usize(ids.len());
        let mut pooled = vec![T::zero(); d];
        for &id in ids {
            let row = &self.data[id * d..(id + 1) * d];
            for (p, &x) in pooled.iter_mut().zip(row) {
                *p += x;
            }
        }
        pooled.iter_mut().for_each(|p| *p *= inv_n);

        let hidden: Vec<T> = (0..h)
            .map(|r| {
                let row = &self.data[w1 + r * d..w1 + (r + 1) * d];
                let z = row
                    .iter()
                    .zip(&pooled)
                    .fold(self.data[b1 + r], |acc, (&w, &x)| acc + w * x);
                z.tanh()
            })
            .collect();
        let out: Vec<T> = (0..d)
            .map(|r| {
                let row = &self.data[w2 + r * h..w2 + (r + 1) * h];
                row.iter()
                    .zip(&hidden)
                    .fold(self.data[b2 + r], |acc, (&w, &a)| acc + w * a)
            })
            .collect();
        Forward {
            ids: ids.to_vec(),
            pooled,
            hidden,
            out,
        }
    }

    /// Accumulate `d loss / d params` into `grads` given `grad_out = d loss / d out`.
    pub fn backward(&self, fwd: &Forward<T>, grad_out: &[T], grads: &mut [T]) {
        let (d, h) = (self.dim, self.hidden);
        let [_, w1, b1, w2, b2] = self.offsets();
        let mut grad_hidden = vec![T::zero(); h];
        for r in 0..d {
            let g = grad_out[r];
            if g == T::zero() {
                continue;
            }
            grads[b2 + r] += g;
            let base = w2 + r * h;
            for c in 0..h {
                grads[base + c] += g * fwd.hidden[c];
                grad_hidden[c] += g * self.data[base + c];
            }
        }
        let mut grad_pooled = vec![T::zero(); d];
        for r in 0..h {
            let a = fwd.hidden[r];
            let gz = grad_hidden[r] * (T::one() - a * a);
            if gz == T::zero() {
                continue;
            }
            grads[b1 + r] += gz;
            let base = w1 + r * d;
            for c in 0..d {
                grads[base + c] += gz * fwd.pooled[c];
                grad_pooled[c] += gz * self.data[base + c];
            }
        }
        let inv_n = T::one() / T::of_usize(fwd.ids.len());
        for &id in &fwd.ids {
            for (g, &gp) in grads[id * d..(id + 1) * d].iter_mut().zip(&grad_pooled) {
                *g += gp * inv_n;
            }
        }
    }

    pub fn encode_ids(&self, ids: &[usize]) -> Vec<T> {
        self.forward(ids).out
    }

    pub fn encode(&self, query: &str) -> Vec<T> {
        self.encode_ids(&self.tokenizer().encode(query))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            vocab: self.vocab,
            dim: self.dim,
            hidden: self.hidden,
            seed: self.seed,
            params: self.data.iter().map(|x| x.as_f64()).collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        Self::from_flat(
            ck.vocab,
            ck.dim,
            ck.hidden,
            ck.seed,
            ck.params.iter().map(|&x| T::of(x)).collect(),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_checkpoint()).map_err(|e| Error::json("checkpoint", e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        Self::from_checkpoint(&ck)
    }
}

const CHECKPOINT_FORMAT: &str = "clickrep-encoder";
const CHECKPOINT_VERSION: u32 = 1;

/// Versioned JSON container for encoder weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub vocab: usize,
    pub dim: usize,
    pub hidden: usize,
    pub seed: u64,
    pub params: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{finite_diff_grad, relative_error};

    #[test]
    fn identical_queries_identical_embeddings() {
        let p = EncoderParams::<f64>::new(512, 8, 6, 3);
        assert_eq!(p.encode("knee pain"), p.encode("knee pain"));
        assert_ne!(p.encode("knee pain"), p.encode("flu shot"));
    }

    #[test]
    fn mean_pooling_ignores_order() {
        let p = EncoderParams::<f64>::new(512, 8, 6, 3);
        assert_eq!(p.encode("a b"), p.encode("b a"));
    }

    #[test]
    fn zero_table_gives_constant_output() {
        let mut p = EncoderParams::<f64>::new(512, 8, 6, 3);
        p.token_table_mut().iter_mut().for_each(|x| *x = 0.0);
        let a = p.encode("knee pain");
        assert_eq!(a, p.encode("completely different words"));
        assert_eq!(a, p.encode(""));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = EncoderParams::<f64>::new(64, 4, 3, 11);
        assert_eq!(a, EncoderParams::new(64, 4, 3, 11));
        assert_ne!(a, EncoderParams::new(64, 4, 3, 12));
        assert!(a.as_slice().iter().all(|x| x.abs() <= INIT_SCALE));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let p = EncoderParams::<f64>::new(16, 4, 5, 9);
        let ids = vec![3, 7, 3, 12];
        let weights = [0.7, -1.3, 0.4, 2.0];
        let loss = |params: &[f64]| {
            let q = EncoderParams::from_flat(16, 4, 5, 9, params.to_vec()).unwrap();
            q.encode_ids(&ids)
                .iter()
                .zip(&weights)
                .map(|(o, w)| o * w + o * o)
                .sum::<f64>()
        };
        let fwd = p.forward(&ids);
        let grad_out: Vec<f64> = fwd.out.iter().zip(&weights).map(|(o, w)| w + 2.0 * o).collect();
        let mut grads = p.zeros_like();
        p.backward(&fwd, &grad_out, &mut grads);
        let numeric = finite_diff_grad(loss, p.as_slice(), 1e-6);
        assert!(relative_error(&grads, &numeric, 1e-12) < 1e-6);
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let p = EncoderParams::<f64>::new(64, 4, 3, 5);
        p.save(&path).unwrap();
        assert_eq!(EncoderParams::<f64>::load(&path).unwrap(), p);
        let mut ck = p.to_checkpoint();
        ck.params.pop();
        assert!(EncoderParams::<f64>::from_checkpoint(&ck).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let p = EncoderParams::<f32>::new(128, 4, 3, 1);
        assert_eq!(p.encode("x y").len(), 4);
    }
}
