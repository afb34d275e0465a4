use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{select_thresholds, ClassifierHead, ThresholdVector};
use crate::encoder::{adam_step, AdamConfig, AdamState, EncoderParams};
use crate::error::{Error, Result};
use crate::eval::{precision_f1, Averaging};
use crate::labeling::LabelVector;
use crate::losses::bce_with_logits;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub head_lr: f64,
    /// Used only when the encoder is co-trained.
    pub encoder_lr: f64,
    /// Epochs without a validation F1 gain before stopping.
    pub patience: usize,
    pub freeze_encoder: bool,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            epochs: 50,
            batch_size: 32,
            head_lr: 5e-2,
            encoder_lr: 1e-3,
            patience: 5,
            freeze_encoder: true,
            seed: 0,
        }
    }
}

/// Token ids of each input with its label set.
#[derive(Debug, Clone, Copy)]
pub struct Examples<'a> {
    pub ids: &'a [Vec<usize>],
    pub labels: &'a [LabelVector],
}

impl Examples<'_> {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedClassifier<T> {
    pub head: ClassifierHead<T>,
    /// The encoder after co-training; `None` when it stayed frozen.
    pub encoder: Option<EncoderParams<T>>,
    pub thresholds: ThresholdVector,
    pub history: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_f1: f64,
}

/// Sigmoid outputs for every input, as `f64`.
pub fn probabilities<T: Scalar>(
    encoder: &EncoderParams<T>,
    head: &ClassifierHead<T>,
    ids: &[Vec<usize>],
) -> Vec<Vec<f64>> {
    ids.iter()
        .map(|x| {
            head.proba(&encoder.encode_ids(x))
                .into_iter()
                .map(|p| p.as_f64())
                .collect()
        })
        .collect()
}

fn validate(encoder: &EncoderParams<impl Scalar>, set: &Examples, name: &str) -> Result<()> {
    if set.ids.len() != set.labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{name}: {} inputs for {} label sets",
            set.ids.len(),
            set.labels.len()
        )));
    }
    if let Some(id) = set.ids.iter().flatten().find(|&&id| id >= encoder.vocab()) {
        return Err(Error::InvalidArgument(format!(
            "{name}: token id {id} outside vocabulary"
        )));
    }
    Ok(())
}

/// Validation F1, epoch, head, tuned encoder and thresholds of the best epoch so far.
type Snapshot<T> = (f64, usize, ClassifierHead<T>, Option<EncoderParams<T>>, ThresholdVector);

/// Fit the head (and optionally the encoder) with mean BCE and Adam, keeping
/// the epoch with the best validation F1 after per-intent threshold selection.
pub fn train_classifier<T: Scalar>(
    encoder: &EncoderParams<T>,
    train: Examples,
    val: Examples,
    cfg: &ClassifierConfig,
) -> Result<TrainedClassifier<T>> {
    if train.is_empty() {
        return Err(Error::Empty("training split is empty".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be positive".into()));
    }
    validate(encoder, &train, "train")?;
    validate(encoder, &val, "validation")?;
    let n_intents = train.labels[0].len();
    if train.labels.iter().chain(val.labels).any(|l| l.len() != n_intents) {
        return Err(Error::ShapeMismatch("inconsistent label width".into()));
    }
    let val = if val.is_empty() {
        log::warn!("empty validation split; selecting on the training split");
        train
    } else {
        val
    };

    let mut enc = encoder.clone();
    let mut head = ClassifierHead::<T>::zeros(n_intents, enc.dim());
    let initial: Vec<Vec<T>> = train.ids.iter().map(|x| enc.encode_ids(x)).collect();
    head.fit_center(&initial);
    let head_cfg = AdamConfig {
        lr: cfg.head_lr,
        ..AdamConfig::default()
    };
    let enc_cfg = AdamConfig {
        lr: cfg.encoder_lr,
        ..AdamConfig::default()
    };
    let mut head_state = AdamState::new(head.params().len());
    let mut enc_state = (!cfg.freeze_encoder).then(|| AdamState::new(enc.len()));
    let frozen_features: Option<Vec<Vec<T>>> = cfg.freeze_encoder.then_some(initial);
    let targets: Vec<Vec<T>> = train
        .labels
        .iter()
        .map(|l| l.as_f64().into_iter().map(T::of).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<Snapshot<T>> = None;
    let mut stale = 0;
    let mut head_grads = vec![T::zero(); head.params().len()];
    let mut enc_grads = if cfg.freeze_encoder {
        Vec::new()
    } else {
        enc.zeros_like()
    };

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            head_grads.iter_mut().for_each(|g| *g = T::zero());
            enc_grads.iter_mut().for_each(|g| *g = T::zero());
            for &i in batch {
                let fwd = if cfg.freeze_encoder {
                    None
                } else {
                    Some(enc.forward(&train.ids[i]))
                };
                let features = match (&frozen_features, &fwd) {
                    (Some(f), _) => &f[i],
                    (None, Some(f)) => &f.out,
                    (None, None) => unreachable!(),
                };
                let lg = bce_with_logits(&targets[i], &head.logits(features))?;
                loss_sum += lg.value.as_f64();
                let grad_features = head.backward(features, &lg.grad, &mut head_grads);
                if let Some(f) = &fwd {
                    enc.backward(f, &grad_features, &mut enc_grads);
                }
            }
            let inv = T::one() / T::of_usize(batch.len());
            head_grads.iter_mut().for_each(|g| *g *= inv);
            adam_step(head.params_mut(), &head_grads, &mut head_state, &head_cfg)?;
            if let Some(state) = enc_state.as_mut() {
                enc_grads.iter_mut().for_each(|g| *g *= inv);
                adam_step(enc.as_mut_slice(), &enc_grads, state, &enc_cfg)?;
            }
        }

        let probs = probabilities(&enc, &head, val.ids);
        let thresholds = select_thresholds(&probs, val.labels)?;
        let decided: Vec<LabelVector> = probs.iter().map(|p| thresholds.decide(p)).collect();
        let val_f1 = precision_f1(&decided, val.labels, Averaging::Micro)?.f1;
        let train_loss = loss_sum / train.len() as f64;
        log::debug!("epoch {epoch}: loss {train_loss:.5}, validation F1 {val_f1:.4}");
        history.push(EpochLog {
            epoch,
            train_loss,
            val_f1,
        });

        if best.as_ref().is_none_or(|b| val_f1 > b.0) {
            let enc_copy = (!cfg.freeze_encoder).then(|| enc.clone());
            best = Some((val_f1, epoch, head.clone(), enc_copy, thresholds));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    let Some((best_val_f1, best_epoch, head, encoder, thresholds)) = best else {
        return Err(Error::InvalidArgument("epochs must be positive".into()));
    };
    Ok(TrainedClassifier {
        head,
        encoder,
        thresholds,
        history,
        best_epoch,
        best_val_f1,
    })
}
