//! Multi-label intent classifier on top of the query encoder, with optional
//! session context in the input sequence.

mod head;
mod input;
mod session;
mod threshold;
mod train;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use head::{predict_proba, ClassifierHead, StoredHead};
pub use input::{assemble_session_input, ContextFlags, ContextMode, SessionInput, DEFAULT_MAX_TOKENS};
pub use session::{example_input, session_dataset, SessionDataset};
pub use threshold::{select_thresholds, threshold_grid, ThresholdVector, DEFAULT_THRESHOLD};
pub use train::{probabilities, train_classifier, ClassifierConfig, EpochLog, Examples, TrainedClassifier};

use crate::error::{Error, Result};
use crate::labeling::{IntentTaxonomy, LabelVector};

/// Everything needed to reuse a trained classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierArtifact {
    pub intents: Vec<String>,
    pub head: StoredHead,
    pub thresholds: ThresholdVector,
    pub context: ContextMode,
    pub max_tokens: usize,
    /// Checkpoint of the co-trained encoder, if the encoder was not frozen.
    pub encoder_checkpoint: Option<String>,
}

impl ClassifierArtifact {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::json("classifier", e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }
}

/// One scored input.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub probs: Vec<f64>,
    pub decided: LabelVector,
}

/// `id`, one probability column per intent, then the decided intents joined by `;`.
pub fn predictions_to_tsv(preds: &[Prediction], taxonomy: &IntentTaxonomy) -> String {
    let mut out = String::from("id");
    for name in taxonomy.names() {
        let _ = write!(out, "\t{name}");
    }
    out.push_str("\tdecided\n");
    for p in preds {
        out.push_str(&p.id);
        for v in &p.probs {
            let _ = write!(out, "\t{v}");
        }
        let _ = writeln!(out, "\t{}", p.decided.names(taxonomy).join(";"));
    }
    out
}

pub fn predictions_from_tsv(text: &str, taxonomy: &IntentTaxonomy) -> Result<Vec<Prediction>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split('\t').collect();
    let n = taxonomy.len();
    if header.len() != n + 2 || header[0] != "id" || header[n + 1] != "decided" || header[1..=n] != *taxonomy.names() {
        return Err(Error::Parse(format!(
            "predictions header does not match the {n}-intent taxonomy"
        )));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != n + 2 {
                return Err(Error::Parse(format!(
                    "predictions row has {} fields, expected {}",
                    f.len(),
                    n + 2
                )));
            }
            let probs = f[1..=n]
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad probability `{v}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            let idx = f[n + 1]
                .split(';')
                .filter(|s| !s.is_empty())
                .map(|name| {
                    taxonomy
                        .index_of(name)
                        .ok_or_else(|| Error::Parse(format!("unknown intent `{name}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Prediction {
                id: f[0].to_string(),
                probs,
                decided: LabelVector::from_indices(n, &idx),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predictions_round_trip() {
        let tax = IntentTaxonomy::new(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let preds = vec![
            Prediction {
                id: "q one".into(),
                probs: vec![0.1, 0.7, 0.123456789],
                decided: LabelVector(vec![false, true, false]),
            },
            Prediction {
                id: "s#1:2".into(),
                probs: vec![0.5, 0.5, 0.5],
                decided: LabelVector(vec![false, false, false]),
            },
        ];
        let text = predictions_to_tsv(&preds, &tax);
        assert_eq!(predictions_from_tsv(&text, &tax).unwrap(), preds);
        let other = IntentTaxonomy::new(vec!["a".into(), "b".into()]).unwrap();
        assert!(predictions_from_tsv(&text, &other).is_err());
    }
}
