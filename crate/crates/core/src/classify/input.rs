use serde::{Deserialize, Serialize};

use crate::clicklog::Session;
use crate::encoder::{Tokenizer, CLS, SEP};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_TOKENS: usize = 64;

/// Which context fields enter the classifier input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContextFlags {
    pub prev_queries: bool,
    pub annotations: bool,
    pub page: bool,
}

/// Named context variants used by the session evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextMode {
    None,
    PrevQuery,
    Page,
    All,
}

impl ContextMode {
    pub const ALL_MODES: [ContextMode; 4] = [
        ContextMode::None,
        ContextMode::PrevQuery,
        ContextMode::Page,
        ContextMode::All,
    ];

    pub fn flags(self) -> ContextFlags {
        match self {
            ContextMode::None => ContextFlags::default(),
            ContextMode::PrevQuery => ContextFlags {
                prev_queries: true,
                ..Default::default()
            },
            ContextMode::Page => ContextFlags {
                page: true,
                ..Default::default()
            },
            ContextMode::All => ContextFlags {
                prev_queries: true,
                annotations: true,
                page: true,
            },
        }
    }
}

impl std::str::FromStr for ContextMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ContextMode::None),
            "prev-query" => Ok(ContextMode::PrevQuery),
            "page" => Ok(ContextMode::Page),
            "all" => Ok(ContextMode::All),
            other => Err(Error::InvalidArgument(format!("unknown context mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for ContextMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ContextMode::None => "none",
            ContextMode::PrevQuery => "prev-query",
            ContextMode::Page => "page",
            ContextMode::All => "all",
        })
    }
}

/// Word sequence fed to the encoder: `[CLS] q_n [SEP] q_{n-1} ... [SEP] a_{n-1} ... [SEP] p_{n-1} ...`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionInput {
    pub words: Vec<String>,
}

impl SessionInput {
    /// Input for a query without context.
    pub fn query(query: &str) -> Self {
        let mut words = vec![CLS.to_string()];
        words.extend(Tokenizer::words(query));
        SessionInput { words }
    }

    pub fn ids(&self, tokenizer: &Tokenizer) -> Vec<usize> {
        tokenizer.encode_words(&self.words)
    }
}

impl std::fmt::Display for SessionInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.words.join(" "))
    }
}

/// Build the input for the 1-based `step` of `session`. Context fields come
/// newest first; the sequence is cut from the tail at `max_tokens`, never
/// dropping `[CLS]` or the current query.
pub fn assemble_session_input(
    session: &Session,
    step: usize,
    flags: ContextFlags,
    max_tokens: usize,
) -> Result<SessionInput> {
    if step == 0 || step > session.len() {
        return Err(Error::InvalidArgument(format!(
            "step {step} outside session `{}` of length {}",
            session.session_id,
            session.len()
        )));
    }
    let mut input = SessionInput::query(&session.steps[step - 1].query);
    let head = input.words.len();
    let previous = session.steps[..step - 1].iter().rev();
    let mut fields: Vec<String> = Vec::new();
    if flags.prev_queries {
        fields.extend(previous.clone().map(|s| s.query.clone()));
    }
    if flags.annotations {
        fields.extend(previous.clone().map(|s| s.annotation.clone()));
    }
    if flags.page {
        fields.extend(previous.map(|s| s.page.clone()));
    }
    for field in fields {
        input.words.push(SEP.to_string());
        input.words.extend(Tokenizer::words(&field));
    }
    input.words.truncate(max_tokens.max(head));
    if input.words.len() > head && input.words.last().map(String::as_str) == Some(SEP) {
        input.words.pop();
    }
    Ok(input)
}
