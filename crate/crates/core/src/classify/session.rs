use serde::{Deserialize, Serialize};

use super::{assemble_session_input, ContextFlags, SessionInput};
use crate::clicklog::{Session, SessionExample};
use crate::error::Result;
use crate::labeling::{session_inferred_intent, LabelVector, Labeler};

/// Classifier inputs built from session examples, labeled with the intent of
/// the document clicked at the current step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionDataset {
    /// `{session_id}:{step}`.
    pub ids: Vec<String>,
    pub inputs: Vec<SessionInput>,
    pub labels: Vec<LabelVector>,
    /// Examples left out because their current step has no routable click.
    pub skipped: usize,
}

impl SessionDataset {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub fn example_input(example: &SessionExample, flags: ContextFlags, max_tokens: usize) -> Result<SessionInput> {
    let session = Session {
        session_id: example.session_id.clone(),
        steps: example.history.clone(),
    };
    assemble_session_input(&session, example.step, flags, max_tokens)
}

pub fn session_dataset(
    examples: &[SessionExample],
    labeler: &Labeler,
    flags: ContextFlags,
    max_tokens: usize,
) -> Result<SessionDataset> {
    let mut out = SessionDataset::default();
    for ex in examples {
        let Some(label) = session_inferred_intent(ex.current(), labeler) else {
            out.skipped += 1;
            continue;
        };
        out.ids.push(format!("{}:{}", ex.session_id, ex.step));
        out.inputs.push(example_input(ex, flags, max_tokens)?);
        out.labels.push(label);
    }
    Ok(out)
}
