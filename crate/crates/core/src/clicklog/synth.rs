//! Planted-cluster click-log generator.
//!
//! Every intent owns a token sub-vocabulary and a small document catalog whose
//! `doc_type` is the intent name. Two logs are produced:
//!
//! * a global, aggregated log (one row per query/document with a click count) in
//!   which every query clicks mostly its own intent plus occasional low-count noise;
//! * a session log with raw clicks. Each session has a session intent `t`; at every
//!   step the user clicks a document of `t`, and with probability `drift_prob` the
//!   query issued belongs to a different global intent (the step "drifts").

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ClickEvent;
use crate::error::{Error, Result};

/// 2022-01-01T00:00:00Z
const BASE_TIMESTAMP: i64 = 1_640_995_200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_intents: usize,
    pub n_queries: usize,
    /// Probability that a query token is drawn from the shared vocabulary.
    pub vocab_overlap: f64,
    pub n_sessions: usize,
    pub drift_prob: f64,
    pub seed: u64,
    pub min_session_len: usize,
    pub max_session_len: usize,
    pub tokens_per_intent: usize,
    pub shared_tokens: usize,
    pub docs_per_intent: usize,
    /// Probability that a query also receives a low-count click on another intent.
    pub noise_prob: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_intents: 8,
            n_queries: 400,
            vocab_overlap: 0.3,
            n_sessions: 600,
            drift_prob: 0.4,
            seed: 42,
            min_session_len: 2,
            max_session_len: 6,
            tokens_per_intent: 16,
            shared_tokens: 24,
            docs_per_intent: 6,
            noise_prob: 0.3,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.n_intents == 0 || self.n_queries == 0 {
            return Err(Error::InvalidArgument(
                "synthetic corpus needs at least one intent and one query".into(),
            ));
        }
        if self.n_queries < self.n_intents {
            return Err(Error::InvalidArgument("need at least one query per intent".into()));
        }
        for (name, v) in [
            ("vocab_overlap", self.vocab_overlap),
            ("drift_prob", self.drift_prob),
            ("noise_prob", self.noise_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.min_session_len == 0 || self.min_session_len > self.max_session_len {
            return Err(Error::InvalidArgument("session length range is empty".into()));
        }
        if self.tokens_per_intent == 0 || self.docs_per_intent == 0 {
            return Err(Error::InvalidArgument(
                "tokens_per_intent and docs_per_intent must be positive".into(),
            ));
        }
        if self.vocab_overlap > 0.0 && self.shared_tokens == 0 {
            return Err(Error::InvalidArgument("vocab_overlap > 0 needs shared tokens".into()));
        }
        Ok(())
    }
}

/// Generator ground truth for one session step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepTruth {
    pub session_id: String,
    pub step: usize,
    pub query: String,
    pub global_intent: usize,
    pub session_intent: usize,
    pub drifted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCorpus {
    pub intent_names: Vec<String>,
    /// Aggregated log used for representation learning and global labels.
    pub global_log: Vec<ClickEvent>,
    /// Raw per-click session log.
    pub session_log: Vec<ClickEvent>,
    /// `(query, planted intent index)` in generation order.
    pub query_intents: Vec<(String, usize)>,
    pub step_truth: Vec<StepTruth>,
}

impl SynthCorpus {
    pub fn drift_fraction(&self) -> f64 {
        if self.step_truth.is_empty() {
            return 0.0;
        }
        self.step_truth.iter().filter(|s| s.drifted).count() as f64 / self.step_truth.len() as f64
    }
}

pub fn intent_name(i: usize) -> String {
    format!("topic{i}")
}

fn intent_token(intent: usize, k: usize) -> String {
    format!("w{intent}x{k}")
}

fn doc(intent: usize, k: usize) -> (String, String, String, String) {
    let name = intent_name(intent);
    (
        format!("{name}-d{k}"),
        format!("/{name}/doc{k}"),
        name.clone(),
        format!("{name} document {k}"),
    )
}

fn click(ts: i64, session: &str, query: &str, intent: usize, k: usize, count: u32) -> ClickEvent {
    let (doc_id, doc_url, doc_type, doc_title) = doc(intent, k);
    ClickEvent {
        timestamp: ts,
        session_id: session.to_string(),
        query: query.to_string(),
        doc_id,
        doc_url,
        doc_type,
        doc_title,
        click_count: count,
    }
}

pub fn synth_generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let shared: Vec<String> = (0..spec.shared_tokens).map(|k| format!("s{k}")).collect();

    let mut seen = HashSet::new();
    let mut query_intents = Vec::with_capacity(spec.n_queries);
    for q in 0..spec.n_queries {
        let intent = q % spec.n_intents;
        let mut text = String::new();
        for attempt in 0..64 {
            let len = rng.gen_range(2..=4);
            let tokens: Vec<String> = (0..len)
                .map(|_| {
                    if rng.gen_bool(spec.vocab_overlap) {
                        shared.choose(&mut rng).cloned().unwrap_or_default()
                    } else {
                        intent_token(intent, rng.gen_range(0..spec.tokens_per_intent))
                    }
                })
                .collect();
            text = tokens.join(" ");
            if attempt == 63 {
                text = format!("{text} n{q}");
            }
            if !seen.contains(&text) {
                break;
            }
        }
        seen.insert(text.clone());
        query_intents.push((text, intent));
    }

    let mut global_log = Vec::new();
    for (q, (query, intent)) in query_intents.iter().enumerate() {
        let sid = format!("g{q}");
        let ts = BASE_TIMESTAMP + q as i64;
        let primary = rng.gen_range(0..spec.docs_per_intent);
        let primary_count: u32 = rng.gen_range(5..=40);
        global_log.push(click(ts, &sid, query, *intent, primary, primary_count));
        if spec.noise_prob > 0.0 && spec.n_intents > 1 && rng.gen_bool(spec.noise_prob) {
            let other = (intent + rng.gen_range(1..spec.n_intents)) % spec.n_intents;
            // keep noise well below a fifth of the query's click mass
            let cap = (primary_count * 3 / 20).max(1);
            let count = rng.gen_range(1..=cap);
            global_log.push(click(
                ts,
                &sid,
                query,
                other,
                rng.gen_range(0..spec.docs_per_intent),
                count,
            ));
        }
    }

    let mut by_intent: Vec<Vec<usize>> = vec![Vec::new(); spec.n_intents];
    for (q, (_, intent)) in query_intents.iter().enumerate() {
        by_intent[*intent].push(q);
    }

    let mut session_log = Vec::new();
    let mut step_truth = Vec::new();
    for s in 0..spec.n_sessions {
        let sid = format!("s{s}");
        let theme = rng.gen_range(0..spec.n_intents);
        let len = rng.gen_range(spec.min_session_len..=spec.max_session_len);
        let mut ts = BASE_TIMESTAMP + 10_000_000 + s as i64 * 20_000;
        for step in 1..=len {
            let drifted = spec.n_intents > 1 && rng.gen_bool(spec.drift_prob);
            let query_intent = if drifted {
                (theme + rng.gen_range(1..spec.n_intents)) % spec.n_intents
            } else {
                theme
            };
            let q = *by_intent[query_intent]
                .choose(&mut rng)
                .expect("every intent owns a query");
            let query = &query_intents[q].0;
            session_log.push(click(ts, &sid, query, theme, rng.gen_range(0..spec.docs_per_intent), 1));
            step_truth.push(StepTruth {
                session_id: sid.clone(),
                step,
                query: query.clone(),
                global_intent: query_intent,
                session_intent: theme,
                drifted,
            });
            ts += rng.gen_range(20..=600);
        }
    }

    Ok(SynthCorpus {
        intent_names: (0..spec.n_intents).map(intent_name).collect(),
        global_log,
        session_log,
        query_intents,
        step_truth,
    })
}
