use std::path::PathBuf;

/// Errors raised across the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown log format `{0}` (expected `canonical-tsv` or `tripclick-like`)")]
    UnknownFormat(String),
    #[error("header mismatch in {path}: expected `{expected}`, found `{found}`")]
    HeaderMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{malformed} of {total} rows malformed (limit 10%); first problems: {sample}")]
    TooManyMalformed {
        malformed: usize,
        total: usize,
        sample: String,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("non-finite gradient at index {index} ({value})")]
    NonFiniteGradient { index: usize, value: f64 },
    #[error("invalid regex for intent `{intent}`: {source}")]
    Regex {
        intent: String,
        #[source]
        source: regex::Error,
    },
    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("manifest check failed: {0}")]
    Manifest(String),
    #[error("stage `{stage}` failed: {cause}")]
    Stage { stage: String, cause: Box<Error> },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// Process exit code for the failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::UnknownFormat(_)
            | Error::HeaderMismatch { .. }
            | Error::TooManyMalformed { .. }
            | Error::Parse(_)
            | Error::Json { .. } => 4,
            Error::Config(_) | Error::InvalidArgument(_) | Error::Regex { .. } => 2,
            Error::Manifest(_) => 6,
            Error::Stage { cause, .. } => cause.exit_code(),
            _ => 5,
        }
    }
}
