//! Encoder training on co-query sets with the multiset or pairwise objective.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cosets::{batch_sample_with, Batch, CoQueryCorpus, MemberSampling};
use crate::encoder::{adam_step, AdamConfig, AdamState, EncoderParams, Forward};
use crate::error::{Error, Result};
use crate::losses::{multiset_loss, pairwise_loss, pairwise_triples, EmbeddedSet, LossConfig, Objective};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub objective: Objective,
    pub epochs: usize,
    /// Document sets per batch (B).
    pub sets_per_batch: usize,
    /// Queries drawn per set (M).
    pub queries_per_set: usize,
    pub adam: AdamConfig,
    pub loss: LossConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: Objective::Multiset,
            epochs: 3,
            sets_per_batch: 8,
            queries_per_set: 8,
            adam: AdamConfig::default(),
            loss: LossConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub objective: Objective,
    pub steps: usize,
    /// Mean batch loss per epoch.
    pub epoch_loss: Vec<f64>,
}

/// Batches per epoch: enough draws to cover every set member about once.
pub fn batches_per_epoch(corpus: &CoQueryCorpus, cfg: &TrainConfig) -> usize {
    let members: usize = corpus.sets.iter().map(|s| s.n_members()).sum();
    members.div_ceil(cfg.sets_per_batch * cfg.queries_per_set).max(1)
}

fn forward_batch<T: Scalar>(encoder: &EncoderParams<T>, batch: &Batch) -> Vec<Vec<Forward<T>>> {
    let tok = encoder.tokenizer();
    batch
        .sets
        .iter()
        .map(|s| s.queries.iter().map(|q| encoder.forward(&tok.encode(q))).collect())
        .collect()
}

/// Batch loss, the forward caches and `d loss / d embedding`, all grouped by set.
pub type BatchEval<T> = (T, Vec<Vec<Forward<T>>>, Vec<Vec<Vec<T>>>);

/// Loss of one batch and its gradient for every sampled query, grouped by set.
pub fn batch_loss<T: Scalar, R: rand::Rng + ?Sized>(
    encoder: &EncoderParams<T>,
    batch: &Batch,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<BatchEval<T>> {
    let fwd = forward_batch(encoder, batch);
    match cfg.objective {
        Objective::Multiset => {
            let sets: Vec<EmbeddedSet<T>> = fwd
                .iter()
                .zip(&batch.sets)
                .map(|(f, s)| {
                    EmbeddedSet::new(
                        f.iter().map(|x| x.out.clone()).collect(),
                        s.weights.iter().map(|&w| T::of(w)).collect(),
                    )
                })
                .collect();
            let lg = multiset_loss(&sets, &cfg.loss)?;
            Ok((lg.value, fwd, lg.grad))
        }
        Objective::Pairwise => {
            let mut flat = Vec::new();
            let mut groups = Vec::new();
            for (g, f) in fwd.iter().enumerate() {
                for x in f {
                    flat.push(x.out.clone());
                    groups.push(g);
                }
            }
            let triples = pairwise_triples(&groups, rng);
            let lg = pairwise_loss(&flat, &triples, T::of(cfg.loss.norm_floor))?;
            let mut grads = lg.grad.into_iter();
            let grouped = fwd
                .iter()
                .map(|f| {
                    f.iter()
                        .map(|_| grads.next().expect("one gradient per query"))
                        .collect()
                })
                .collect();
            Ok((lg.value, fwd, grouped))
        }
        Objective::Bce => Err(Error::InvalidArgument(
            "the bce objective trains the classifier, not the encoder".into(),
        )),
    }
}

/// Train `encoder` in place. Sampling and pairing are seeded by `cfg.seed`.
pub fn train_encoder<T: Scalar>(
    encoder: &mut EncoderParams<T>,
    corpus: &CoQueryCorpus,
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    train_encoder_with(encoder, corpus, cfg, |_, _| {})
}

/// [`train_encoder`] with a callback after every epoch (1-based).
pub fn train_encoder_with<T: Scalar>(
    encoder: &mut EncoderParams<T>,
    corpus: &CoQueryCorpus,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &EncoderParams<T>),
) -> Result<TrainLog> {
    cfg.loss.validate()?;
    let sampling = match cfg.objective {
        Objective::Multiset => MemberSampling::Weighted,
        // the pairwise objective has no notion of click weight
        Objective::Pairwise => MemberSampling::Uniform,
        Objective::Bce => {
            return Err(Error::InvalidArgument(
                "the bce objective trains the classifier, not the encoder".into(),
            ))
        }
    };
    let eligible = corpus.sets.iter().filter(|s| s.n_members() >= 2).count();
    let mut cfg = *cfg;
    if eligible < cfg.sets_per_batch {
        if eligible < 2 {
            return Err(Error::InvalidArgument(format!(
                "only {eligible} sets have two or more members; training needs two"
            )));
        }
        log::warn!(
            "only {eligible} eligible sets; using {eligible} sets per batch instead of {}",
            cfg.sets_per_batch
        );
        cfg.sets_per_batch = eligible;
    }
    let cfg = &cfg;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AdamState::new(encoder.len());
    let mut grads = encoder.zeros_like();
    let per_epoch = batches_per_epoch(corpus, cfg);
    let mut log = TrainLog {
        objective: cfg.objective,
        steps: 0,
        epoch_loss: Vec::with_capacity(cfg.epochs),
    };
    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        for _ in 0..per_epoch {
            let batch = batch_sample_with(corpus, cfg.sets_per_batch, cfg.queries_per_set, sampling, &mut rng)?;
            let (value, fwd, g) = batch_loss(encoder, &batch, cfg, &mut rng)?;
            total += value.as_f64();
            grads.iter_mut().for_each(|x| *x = T::zero());
            for (fs, gs) in fwd.iter().zip(&g) {
                for (f, gq) in fs.iter().zip(gs) {
                    encoder.backward(f, gq, &mut grads);
                }
            }
            adam_step(encoder.as_mut_slice(), &grads, &mut state, &cfg.adam)?;
            log.steps += 1;
        }
        let mean = total / per_epoch as f64;
        log::debug!("{} epoch {}: mean loss {mean:.5}", cfg.objective, epoch + 1);
        log.epoch_loss.push(mean);
        on_epoch(epoch + 1, encoder);
    }
    Ok(log)
}

/// Encoder output for each query.
pub fn embed_queries<T: Scalar, S: AsRef<str>>(encoder: &EncoderParams<T>, queries: &[S]) -> Vec<Vec<T>> {
    queries.iter().map(|q| encoder.encode(q.as_ref())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cosets::compute_weights;

    fn corpus() -> CoQueryCorpus {
        let set = |id: &str, qs: &[&str]| compute_weights(id, qs.iter().map(|q| (q.to_string(), 5)).collect()).unwrap();
        CoQueryCorpus::from_sets(vec![
            set("a", &["flu shot", "flu vaccine", "vaccine clinic"]),
            set("b", &["refill meds", "prescription refill", "pharmacy hours"]),
            set("c", &["find doctor", "cardiologist near me", "primary care doctor"]),
        ])
    }

    #[test]
    fn multiset_loss_decreases() {
        let c = corpus();
        let mut enc = EncoderParams::<f64>::new(256, 8, 8, 1);
        let cfg = TrainConfig {
            epochs: 30,
            sets_per_batch: 3,
            queries_per_set: 3,
            adam: AdamConfig {
                lr: 1e-2,
                ..AdamConfig::default()
            },
            ..TrainConfig::default()
        };
        let log = train_encoder(&mut enc, &c, &cfg).unwrap();
        assert_eq!(log.steps, 30);
        assert!(log.epoch_loss[29] < log.epoch_loss[0], "{:?}", log.epoch_loss);
    }

    #[test]
    fn pairwise_runs_and_is_deterministic() {
        let c = corpus();
        let cfg = TrainConfig {
            objective: Objective::Pairwise,
            epochs: 3,
            sets_per_batch: 2,
            queries_per_set: 2,
            ..TrainConfig::default()
        };
        let mut a = EncoderParams::<f64>::new(256, 8, 8, 1);
        let mut b = a.clone();
        assert_eq!(
            train_encoder(&mut a, &c, &cfg).unwrap(),
            train_encoder(&mut b, &c, &cfg).unwrap()
        );
        assert_eq!(a, b);
    }

    #[test]
    fn batch_width_clamps_to_eligible_sets() {
        let mut enc = EncoderParams::<f64>::new(256, 8, 8, 1);
        let cfg = TrainConfig {
            epochs: 1,
            sets_per_batch: 8,
            queries_per_set: 2,
            ..TrainConfig::default()
        };
        assert!(train_encoder(&mut enc, &corpus(), &cfg).is_ok());
    }

    #[test]
    fn bce_is_not_an_encoder_objective() {
        let mut enc = EncoderParams::<f64>::new(64, 4, 4, 0);
        let cfg = TrainConfig {
            objective: Objective::Bce,
            ..TrainConfig::default()
        };
        assert!(train_encoder(&mut enc, &corpus(), &cfg).is_err());
    }
}
