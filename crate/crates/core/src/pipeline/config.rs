use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::classify::ContextMode;
use crate::clicklog::LogFormat;
use crate::cosets::GroupKey;
use crate::error::{Error, Result};
use crate::eval::Averaging;
use crate::losses::Objective;

/// Prefix of environment variables that override config keys:
/// `CLICKREP_EPOCHS=5` sets `epochs`.
pub const ENV_PREFIX: &str = "CLICKREP_";

/// Every key with its documentation, in file order.
pub const SCHEMA: &[(&str, &str)] = &[
    ("out_dir", "directory receiving every artifact of the run"),
    (
        "dataset",
        "`synth` to generate a planted corpus, `log` to read log_path",
    ),
    ("log_path", "click log for dataset = log"),
    (
        "session_log_path",
        "separate per-click session log; empty reuses log_path",
    ),
    ("log_format", "`canonical-tsv` or `tripclick-like`"),
    ("gap_seconds", "inactivity gap that splits sessions"),
    ("synth_intents", "planted intents"),
    ("synth_queries", "distinct queries"),
    (
        "synth_overlap",
        "probability a query token comes from the shared vocabulary",
    ),
    ("synth_sessions", "generated sessions"),
    (
        "synth_drift",
        "probability a session step issues a query of another intent",
    ),
    (
        "session_min_len",
        "shortest session kept for session evaluation (also used by synth)",
    ),
    (
        "session_max_len",
        "longest session kept for session evaluation (also used by synth)",
    ),
    ("seed", "root seed; every stage derives its own seed from it"),
    (
        "group_key",
        "`doc_type` or `url_pattern`: what a document set groups on",
    ),
    (
        "min_clicks",
        "smallest aggregated click count that puts a query in a set",
    ),
    (
        "intents",
        "comma-separated taxonomy; empty takes the sorted document types of the log",
    ),
    (
        "rules_path",
        "JSON list of {intent, pattern} URL rules; empty routes by document type",
    ),
    (
        "label_threshold",
        "click share an intent needs to enter a query's label set",
    ),
    ("objective", "`multiset` or `pairwise`"),
    ("vocab", "hashed vocabulary size"),
    ("dim", "embedding width"),
    ("hidden", "encoder hidden width"),
    ("lr", "encoder learning rate"),
    ("epochs", "encoder training epochs"),
    ("sets_per_batch", "document sets per batch"),
    ("queries_per_set", "queries drawn per set"),
    ("epsilon", "added to the intra/inter denominators"),
    ("cosine_clamp", "largest cosine fed to the intra/inter terms"),
    (
        "leave_one_out",
        "exclude a query from its own centroid in the intra term",
    ),
    ("split_train", "training share of the stratified split"),
    ("split_val", "validation share"),
    ("split_test", "test share"),
    ("min_group", "label combinations rarer than this go to test"),
    ("kmeans_k", "clusters; 0 uses the number of distinct global intents"),
    ("kmeans_restarts", "k-means restarts"),
    ("clf_epochs", "classifier epochs"),
    ("clf_batch_size", "classifier batch size"),
    ("clf_head_lr", "classifier head learning rate"),
    ("clf_encoder_lr", "encoder learning rate when co-training"),
    ("clf_patience", "epochs without validation gain before stopping"),
    (
        "freeze_encoder",
        "keep encoder weights fixed while fitting the classifier",
    ),
    ("max_tokens", "token budget of a session input"),
    ("contexts", "comma-separated context modes for session evaluation"),
    ("averaging", "`micro` or `macro` precision/F1"),
];

/// Everything a run needs. Every key has a default; see [`SCHEMA`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    pub dataset: Dataset,
    pub log_path: Option<PathBuf>,
    pub session_log_path: Option<PathBuf>,
    pub log_format: String,
    pub gap_seconds: i64,
    pub synth_intents: usize,
    pub synth_queries: usize,
    pub synth_overlap: f64,
    pub synth_sessions: usize,
    pub synth_drift: f64,
    pub session_min_len: usize,
    pub session_max_len: usize,
    pub seed: u64,
    pub group_key: GroupKey,
    pub min_clicks: u64,
    pub intents: Vec<String>,
    pub rules_path: Option<PathBuf>,
    pub label_threshold: f64,
    pub objective: Objective,
    pub vocab: usize,
    pub dim: usize,
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub sets_per_batch: usize,
    pub queries_per_set: usize,
    pub epsilon: f64,
    pub cosine_clamp: f64,
    pub leave_one_out: bool,
    pub split_train: f64,
    pub split_val: f64,
    pub split_test: f64,
    pub min_group: usize,
    pub kmeans_k: usize,
    pub kmeans_restarts: usize,
    pub clf_epochs: usize,
    pub clf_batch_size: usize,
    pub clf_head_lr: f64,
    pub clf_encoder_lr: f64,
    pub clf_patience: usize,
    pub freeze_encoder: bool,
    pub max_tokens: usize,
    pub contexts: Vec<ContextMode>,
    pub averaging: Averaging,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dataset {
    Synth,
    Log,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            out_dir: PathBuf::from("run"),
            dataset: Dataset::Synth,
            log_path: None,
            session_log_path: None,
            log_format: "canonical-tsv".into(),
            gap_seconds: crate::clicklog::DEFAULT_GAP_SECONDS,
            synth_intents: 8,
            synth_queries: 400,
            synth_overlap: 0.3,
            synth_sessions: 600,
            synth_drift: 0.4,
            session_min_len: 4,
            session_max_len: 4,
            seed: 42,
            group_key: GroupKey::DocType,
            min_clicks: crate::cosets::HS_MIN_CLICKS,
            intents: Vec::new(),
            rules_path: None,
            label_threshold: crate::labeling::DEFAULT_MULTI_LABEL_THRESHOLD,
            objective: Objective::Multiset,
            vocab: crate::encoder::DEFAULT_VOCAB,
            dim: crate::encoder::DEFAULT_DIM,
            hidden: crate::encoder::DEFAULT_HIDDEN,
            lr: 1e-3,
            epochs: 3,
            sets_per_batch: 8,
            queries_per_set: 8,
            epsilon: 1e-6,
            cosine_clamp: 1.0 - 1e-6,
            leave_one_out: false,
            split_train: 0.6,
            split_val: 0.2,
            split_test: 0.2,
            min_group: crate::eval::DEFAULT_MIN_GROUP,
            kmeans_k: 0,
            kmeans_restarts: crate::eval::DEFAULT_RESTARTS,
            clf_epochs: 50,
            clf_batch_size: 32,
            clf_head_lr: 5e-2,
            clf_encoder_lr: 1e-3,
            clf_patience: 5,
            freeze_encoder: true,
            max_tokens: crate::classify::DEFAULT_MAX_TOKENS,
            contexts: ContextMode::ALL_MODES.to_vec(),
            averaging: Averaging::Micro,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "bad value `{value}` for `{key}` (expected true or false)"
        ))),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn list(value: &str) -> Vec<&str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    /// Assign one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let typed = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(format!("`{key}`: {other}")),
        };
        match key {
            "out_dir" => self.out_dir = PathBuf::from(v),
            "dataset" => {
                self.dataset = match v {
                    "synth" => Dataset::Synth,
                    "log" => Dataset::Log,
                    _ => return Err(Error::Config(format!("dataset must be `synth` or `log`, got `{v}`"))),
                }
            }
            "log_path" => self.log_path = optional_path(v),
            "session_log_path" => self.session_log_path = optional_path(v),
            "log_format" => {
                LogFormat::from_str(v).map_err(typed)?;
                self.log_format = v.to_string();
            }
            "gap_seconds" => self.gap_seconds = parse(key, v)?,
            "synth_intents" => self.synth_intents = parse(key, v)?,
            "synth_queries" => self.synth_queries = parse(key, v)?,
            "synth_overlap" => self.synth_overlap = parse(key, v)?,
            "synth_sessions" => self.synth_sessions = parse(key, v)?,
            "synth_drift" => self.synth_drift = parse(key, v)?,
            "session_min_len" => self.session_min_len = parse(key, v)?,
            "session_max_len" => self.session_max_len = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "group_key" => self.group_key = GroupKey::from_str(v).map_err(typed)?,
            "min_clicks" => self.min_clicks = parse(key, v)?,
            "intents" => self.intents = list(v).into_iter().map(String::from).collect(),
            "rules_path" => self.rules_path = optional_path(v),
            "label_threshold" => self.label_threshold = parse(key, v)?,
            "objective" => self.objective = Objective::from_str(v).map_err(typed)?,
            "vocab" => self.vocab = parse(key, v)?,
            "dim" => self.dim = parse(key, v)?,
            "hidden" => self.hidden = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "sets_per_batch" => self.sets_per_batch = parse(key, v)?,
            "queries_per_set" => self.queries_per_set = parse(key, v)?,
            "epsilon" => self.epsilon = parse(key, v)?,
            "cosine_clamp" => self.cosine_clamp = parse(key, v)?,
            "leave_one_out" => self.leave_one_out = parse_bool(key, v)?,
            "split_train" => self.split_train = parse(key, v)?,
            "split_val" => self.split_val = parse(key, v)?,
            "split_test" => self.split_test = parse(key, v)?,
            "min_group" => self.min_group = parse(key, v)?,
            "kmeans_k" => self.kmeans_k = parse(key, v)?,
            "kmeans_restarts" => self.kmeans_restarts = parse(key, v)?,
            "clf_epochs" => self.clf_epochs = parse(key, v)?,
            "clf_batch_size" => self.clf_batch_size = parse(key, v)?,
            "clf_head_lr" => self.clf_head_lr = parse(key, v)?,
            "clf_encoder_lr" => self.clf_encoder_lr = parse(key, v)?,
            "clf_patience" => self.clf_patience = parse(key, v)?,
            "freeze_encoder" => self.freeze_encoder = parse_bool(key, v)?,
            "max_tokens" => self.max_tokens = parse(key, v)?,
            "contexts" => {
                self.contexts = list(v)
                    .into_iter()
                    .map(|m| ContextMode::from_str(m).map_err(typed))
                    .collect::<Result<_>>()?
            }
            "averaging" => self.averaging = Averaging::from_str(v).map_err(typed)?,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Current value of every key, in [`SCHEMA`] order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let values = [
            self.out_dir.display().to_string(),
            match self.dataset {
                Dataset::Synth => "synth".into(),
                Dataset::Log => "log".into(),
            },
            show_path(&self.log_path),
            show_path(&self.session_log_path),
            self.log_format.clone(),
            self.gap_seconds.to_string(),
            self.synth_intents.to_string(),
            self.synth_queries.to_string(),
            self.synth_overlap.to_string(),
            self.synth_sessions.to_string(),
            self.synth_drift.to_string(),
            self.session_min_len.to_string(),
            self.session_max_len.to_string(),
            self.seed.to_string(),
            match self.group_key {
                GroupKey::DocType => "doc_type".into(),
                GroupKey::UrlPattern => "url_pattern".into(),
            },
            self.min_clicks.to_string(),
            self.intents.join(","),
            show_path(&self.rules_path),
            self.label_threshold.to_string(),
            self.objective.to_string(),
            self.vocab.to_string(),
            self.dim.to_string(),
            self.hidden.to_string(),
            self.lr.to_string(),
            self.epochs.to_string(),
            self.sets_per_batch.to_string(),
            self.queries_per_set.to_string(),
            self.epsilon.to_string(),
            self.cosine_clamp.to_string(),
            self.leave_one_out.to_string(),
            self.split_train.to_string(),
            self.split_val.to_string(),
            self.split_test.to_string(),
            self.min_group.to_string(),
            self.kmeans_k.to_string(),
            self.kmeans_restarts.to_string(),
            self.clf_epochs.to_string(),
            self.clf_batch_size.to_string(),
            self.clf_head_lr.to_string(),
            self.clf_encoder_lr.to_string(),
            self.clf_patience.to_string(),
            self.freeze_encoder.to_string(),
            self.max_tokens.to_string(),
            self.contexts
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(","),
            match self.averaging {
                Averaging::Micro => "micro".into(),
                Averaging::Macro => "macro".into(),
            },
        ];
        SCHEMA.iter().map(|(k, _)| *k).zip(values).collect()
    }

    /// `key = value` lines; `#` starts a comment.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(key.trim(), value)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    /// Apply `CLICKREP_*` variables. Unknown names are rejected like unknown keys.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
        for (name, value) in vars {
            if let Some(key) = name.strip_prefix(ENV_PREFIX) {
                let key = key.to_ascii_lowercase();
                self.set(&key, &value)
                    .map_err(|e| Error::Config(format!("{name}: {e}")))?;
            }
        }
        Ok(())
    }

    /// Serialized form; `parse_str` reads it back to an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for ((key, value), (_, doc)) in self.to_pairs().into_iter().zip(SCHEMA) {
            let _ = writeln!(out, "# {doc}\n{key} = {value}");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let ratios = [self.split_train, self.split_val, self.split_test];
        if ratios.iter().any(|&r| r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split ratios {ratios:?} must be non-negative and sum to 1"
            )));
        }
        if self.dataset == Dataset::Log && self.log_path.is_none() {
            return Err(Error::Config("dataset = log needs log_path".into()));
        }
        if self.session_min_len < 2 || self.session_min_len > self.session_max_len {
            return Err(Error::Config("need 2 <= session_min_len <= session_max_len".into()));
        }
        if self.contexts.is_empty() {
            return Err(Error::Config("contexts lists no mode".into()));
        }
        for (key, v) in [
            ("vocab", self.vocab),
            ("dim", self.dim),
            ("hidden", self.hidden),
            ("max_tokens", self.max_tokens),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("`{key}` must be positive")));
            }
        }
        Ok(())
    }

    pub fn ratios(&self) -> [f64; 3] {
        [self.split_train, self.split_val, self.split_test]
    }
}
