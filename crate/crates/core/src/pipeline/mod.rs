//! End-to-end run: ingest, set extraction, labeling, encoder training,
//! clustering evaluation, classifier training and evaluation, and the session
//! context ablation. Every stage writes a hash-linked manifest.

mod config;
mod manifest;
mod report;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use config::{Dataset, RunConfig, ENV_PREFIX, SCHEMA};
pub use manifest::{derive_seed, manifest_name, sha256_file, sha256_hex, verify_chain, FileDigest, StageManifest};
pub use report::{
    load_reports, save_reports, summary_columns, summary_csv, summary_from_csv, summary_table, RunSummary,
};

use crate::classify::{
    probabilities, session_dataset, train_classifier, ClassifierArtifact, ClassifierConfig, ClassifierHead,
    ContextMode, Examples, Prediction, SessionInput, TrainedClassifier,
};
use crate::clicklog::{
    curate_sessions, parse_log, sessionize, synth_generate, write_canonical, ClickEvent, LogFormat, Session,
    SynthCorpus, SynthSpec,
};
use crate::cosets::{extract_sets, CoQueryCorpus};
use crate::encoder::{AdamConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::eval::{classification_report, cluster_report, random_split, stratified_split, MetricReport, Partition};
use crate::labeling::{
    click_stats, concordance_rate, intent_distribution, label_corpus, labels_from_tsv, labels_to_tsv, read_rules,
    IntentMatch, IntentTaxonomy, LabelVector, Labeler, QueryLabel,
};
use crate::losses::LossConfig;
use crate::training::{embed_queries, train_encoder, TrainConfig};

pub const CONFIG_SNAPSHOT: &str = "config.txt";
pub const EVENTS: &str = "events.tsv";
pub const SESSION_EVENTS: &str = "session_events.tsv";
pub const SYNTH_TRUTH: &str = "synth_truth.json";
pub const SETS: &str = "sets.jsonl";
pub const TAXONOMY: &str = "taxonomy.json";
pub const LABELS: &str = "labels.tsv";
pub const LABEL_STATS: &str = "label_stats.json";
pub const ENCODER: &str = "encoder.json";
pub const TRAIN_LOG: &str = "train_log.json";
pub const CLUSTER_REPORT: &str = "cluster_report.json";
pub const SPLITS: &str = "splits.json";
pub const CLASSIFIER: &str = "classifier.json";
pub const CLASSIFIER_ENCODER: &str = "classifier_encoder.json";
pub const CLASSIFIER_HISTORY: &str = "classifier_history.json";
pub const PREDICTIONS: &str = "predictions.tsv";
pub const EVAL_REPORT: &str = "eval_report.json";
pub const SESSION_REPORTS: &str = "session_eval.json";

/// Stage names in execution order.
pub const STAGES: [&str; 8] = [
    "ingest",
    "extract-sets",
    "label",
    "train",
    "cluster-eval",
    "train-classifier",
    "eval",
    "session-eval",
];

/// Split of labeled queries used by the query classifier.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySplits {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    pub n_queries: usize,
    pub n_labeled: usize,
    pub multi_label: usize,
    pub mean_perplexity: f64,
    /// Mean concordance rate over sessions with at least one comparable step.
    pub concordance_rate: Option<f64>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path.display().to_string(), e))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Dominant intent of every query with routable clicks; ties go to the
/// lower intent index.
pub fn global_intents(events: &[ClickEvent], labeler: &Labeler) -> BTreeMap<String, usize> {
    click_stats(events)
        .into_iter()
        .filter_map(|(q, stats)| {
            let dist = intent_distribution(&stats, labeler).ok()?;
            let best = dist
                .probs
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, &p)| if p > b.1 { (i, p) } else { b });
            Some((q, best.0))
        })
        .collect()
}

/// Write the global log, the session log and the generator's ground truth
/// into `dir`.
pub fn write_synth(corpus: &SynthCorpus, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_canonical(&dir.join(EVENTS), &corpus.global_log)?;
    write_canonical(&dir.join(SESSION_EVENTS), &corpus.session_log)?;
    let truth = serde_json::json!({
        "intent_names": corpus.intent_names,
        "query_intents": corpus.query_intents,
        "step_truth": corpus.step_truth,
    });
    write_json(&dir.join(SYNTH_TRUTH), &truth)
}

/// Cluster the embeddings of labeled queries and score against their label
/// combinations, one cluster per distinct combination. `k = 0` uses the
/// number of combinations.
pub fn cluster_labels(
    name: &str,
    encoder: &EncoderParams<f64>,
    labels: &[QueryLabel],
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<MetricReport> {
    if labels.is_empty() {
        return Err(Error::Empty("no labeled queries to cluster".into()));
    }
    let queries: Vec<&str> = labels.iter().map(|l| l.query.as_str()).collect();
    let truth = Partition::from_labels(labels.iter().map(|l| &l.labels));
    let k = if k == 0 { truth.n_clusters() } else { k };
    cluster_report(name, &embed_queries(encoder, &queries), &truth, k, restarts, seed)
}

/// Intent names: configured, else taken from the rules, else the sorted
/// document types of the log.
pub fn resolve_taxonomy(cfg: &RunConfig, events: &[ClickEvent]) -> Result<IntentTaxonomy> {
    if !cfg.intents.is_empty() {
        return IntentTaxonomy::new(cfg.intents.clone());
    }
    if let Some(path) = &cfg.rules_path {
        let mut names: Vec<String> = Vec::new();
        for r in read_rules(path)? {
            if !names.contains(&r.intent) {
                names.push(r.intent);
            }
        }
        return IntentTaxonomy::new(names);
    }
    let types: BTreeSet<&str> = events
        .iter()
        .map(|e| e.doc_type.as_str())
        .filter(|t| !t.is_empty())
        .collect();
    IntentTaxonomy::new(types.into_iter().map(String::from).collect())
}

pub fn build_labeler(cfg: &RunConfig, taxonomy: IntentTaxonomy) -> Result<Labeler> {
    match &cfg.rules_path {
        Some(path) => Labeler::with_rules(taxonomy, &read_rules(path)?),
        None => Ok(Labeler::by_doc_type(taxonomy)),
    }
}

fn read_events(path: &Path) -> Result<Vec<ClickEvent>> {
    Ok(parse_log(path, LogFormat::CanonicalTsv)?.events)
}

fn load_events(path: &Path, format: &str) -> Result<Vec<ClickEvent>> {
    let report = parse_log(path, LogFormat::from_str(format)?)?;
    if report.malformed > 0 {
        log::warn!("{}: skipped {} malformed rows", path.display(), report.malformed);
    }
    if report.events.is_empty() {
        return Err(Error::Empty(format!("no events in {}", path.display())));
    }
    Ok(report.events)
}

fn classifier_config(cfg: &RunConfig, seed: u64) -> ClassifierConfig {
    ClassifierConfig {
        epochs: cfg.clf_epochs,
        batch_size: cfg.clf_batch_size,
        head_lr: cfg.clf_head_lr,
        encoder_lr: cfg.clf_encoder_lr,
        patience: cfg.clf_patience,
        freeze_encoder: cfg.freeze_encoder,
        seed,
    }
}

pub fn encoder_train_config(cfg: &RunConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        objective: cfg.objective,
        epochs: cfg.epochs,
        sets_per_batch: cfg.sets_per_batch,
        queries_per_set: cfg.queries_per_set,
        adam: AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        loss: LossConfig {
            epsilon: cfg.epsilon,
            cosine_clamp: cfg.cosine_clamp,
            leave_one_out: cfg.leave_one_out,
            ..LossConfig::default()
        },
        seed,
    }
}

fn decide_all(t: &TrainedClassifier<f64>, probs: &[Vec<f64>]) -> Vec<LabelVector> {
    probs.iter().map(|p| t.thresholds.decide(p)).collect()
}

/// Train a classifier on `train`, select on `val`, and score `test`.
pub fn fit_and_score(
    name: &str,
    encoder: &EncoderParams<f64>,
    inputs: [(&[SessionInput], &[LabelVector]); 3],
    cfg: &ClassifierConfig,
    averaging: crate::eval::Averaging,
) -> Result<(TrainedClassifier<f64>, MetricReport, Vec<Vec<f64>>)> {
    let tok = encoder.tokenizer();
    let ids: Vec<Vec<Vec<usize>>> = inputs
        .iter()
        .map(|(x, _)| x.iter().map(|i| i.ids(&tok)).collect())
        .collect();
    let t = train_classifier(
        encoder,
        Examples {
            ids: &ids[0],
            labels: inputs[0].1,
        },
        Examples {
            ids: &ids[1],
            labels: inputs[1].1,
        },
        cfg,
    )?;
    let enc = t.encoder.as_ref().unwrap_or(encoder);
    let probs = probabilities(enc, &t.head, &ids[2]);
    let mut report = classification_report(name, &probs, &decide_all(&t, &probs), inputs[2].1, averaging)?;
    report.notes.push(format!(
        "best validation F1 {:.4} at epoch {}; {} train / {} val / {} test",
        t.best_val_f1,
        t.best_epoch,
        ids[0].len(),
        ids[1].len(),
        ids[2].len()
    ));
    Ok((t, report, probs))
}

/// Session-context ablation: sessions are split by session, each context
/// mode gets its own classifier on identical splits.
pub fn session_ablation(
    sessions: &[Session],
    labeler: &Labeler,
    encoder: &EncoderParams<f64>,
    modes: &[ContextMode],
    cfg: &RunConfig,
    split_seed: u64,
    clf_seed: u64,
) -> Result<Vec<(ContextMode, MetricReport, Vec<Prediction>)>> {
    let kept: Vec<Session> = sessions
        .iter()
        .filter(|s| (cfg.session_min_len..=cfg.session_max_len).contains(&s.len()))
        .cloned()
        .collect();
    if kept.len() < 3 {
        return Err(Error::Empty(format!(
            "{} sessions with {}..={} steps; need at least 3",
            kept.len(),
            cfg.session_min_len,
            cfg.session_max_len
        )));
    }
    let split = random_split(kept.len(), cfg.ratios(), split_seed)?;
    let part = |idx: &[usize]| idx.iter().map(|&i| kept[i].clone()).collect::<Vec<_>>();
    let parts = [part(&split.train), part(&split.val), part(&split.test)];
    let curated: Vec<_> = parts
        .iter()
        .map(|p| curate_sessions(p, cfg.session_min_len, cfg.session_max_len))
        .collect();
    let examples = [
        &curated[0].train_examples,
        &curated[1].eval_examples,
        &curated[2].eval_examples,
    ];

    let mut out = Vec::new();
    for &mode in modes {
        let ds: Vec<_> = examples
            .iter()
            .map(|ex| session_dataset(ex, labeler, mode.flags(), cfg.max_tokens))
            .collect::<Result<_>>()?;
        let name = format!("session {mode}");
        let (t, mut report, probs) = fit_and_score(
            &name,
            encoder,
            [
                (&ds[0].inputs, &ds[0].labels),
                (&ds[1].inputs, &ds[1].labels),
                (&ds[2].inputs, &ds[2].labels),
            ],
            &classifier_config(cfg, clf_seed),
            cfg.averaging,
        )?;
        let skipped: usize = ds.iter().map(|d| d.skipped).sum();
        if skipped > 0 {
            report
                .notes
                .push(format!("{skipped} steps without a routable click skipped"));
        }
        let preds = ds[2]
            .ids
            .iter()
            .zip(&probs)
            .map(|(id, p)| Prediction {
                id: id.clone(),
                probs: p.clone(),
                decided: t.thresholds.decide(p),
            })
            .collect();
        out.push((mode, report, preds));
    }
    Ok(out)
}

/// Runs the stages of one config inside `cfg.out_dir`.
pub struct Pipeline {
    cfg: RunConfig,
    root: PathBuf,
    config_sha256: String,
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let root = cfg.out_dir.clone();
        std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        let text = cfg.to_text();
        let path = root.join(CONFIG_SNAPSHOT);
        std::fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
        Ok(Pipeline {
            config_sha256: sha256_hex(text.as_bytes()),
            cfg,
            root,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn seed(&self, label: &str) -> u64 {
        derive_seed(self.cfg.seed, label)
    }

    fn record(&self, stage: &str, seeds: &[&str], upstream: &[&str], inputs: &[&str], outputs: &[&str]) -> Result<()> {
        let seeds = seeds.iter().map(|s| (s.to_string(), self.seed(s))).collect();
        StageManifest::build(&self.root, stage, &self.config_sha256, seeds, upstream, inputs, outputs)?.save(&self.root)
    }

    fn external_inputs(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.cfg.dataset == Dataset::Log {
            v.extend(
                self.cfg
                    .log_path
                    .iter()
                    .chain(&self.cfg.session_log_path)
                    .map(|p| p.display().to_string()),
            );
        }
        v.extend(self.cfg.rules_path.iter().map(|p| p.display().to_string()));
        v
    }

    /// Run one stage after checking the manifests it depends on.
    pub fn run_stage(&self, stage: &str) -> Result<()> {
        let pos = STAGES
            .iter()
            .position(|s| *s == stage)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown stage `{stage}`")))?;
        let wrap = |cause: Error| Error::Stage {
            stage: stage.to_string(),
            cause: Box::new(cause),
        };
        verify_chain(&self.root, &STAGES[..pos]).map_err(wrap)?;
        log::info!("stage {stage}");
        match stage {
            "ingest" => self.ingest(),
            "extract-sets" => self.extract_sets(),
            "label" => self.label(),
            "train" => self.train(),
            "cluster-eval" => self.cluster_eval(),
            "train-classifier" => self.train_classifier(),
            "eval" => self.eval(),
            "session-eval" => self.session_eval(),
            _ => unreachable!(),
        }
        .map_err(wrap)
    }

    pub fn run_all(&self) -> Result<()> {
        for stage in STAGES {
            self.run_stage(stage)?;
        }
        verify_chain(&self.root, &STAGES)
    }

    fn ingest(&self) -> Result<()> {
        let cfg = &self.cfg;
        let mut outputs = vec![EVENTS, SESSION_EVENTS];
        match cfg.dataset {
            Dataset::Synth => {
                let corpus = synth_generate(&SynthSpec {
                    n_intents: cfg.synth_intents,
                    n_queries: cfg.synth_queries,
                    vocab_overlap: cfg.synth_overlap,
                    n_sessions: cfg.synth_sessions,
                    drift_prob: cfg.synth_drift,
                    seed: self.seed("synth"),
                    min_session_len: cfg.session_min_len,
                    max_session_len: cfg.session_max_len,
                    ..SynthSpec::default()
                })?;
                write_synth(&corpus, &self.root)?;
                outputs.push(SYNTH_TRUTH);
            }
            Dataset::Log => {
                let log_path = cfg.log_path.as_ref().expect("validated");
                let events = load_events(log_path, &cfg.log_format)?;
                let sessions = match &cfg.session_log_path {
                    Some(p) => load_events(p, &cfg.log_format)?,
                    None => events.clone(),
                };
                write_canonical(&self.path(EVENTS), &events)?;
                write_canonical(&self.path(SESSION_EVENTS), &sessions)?;
            }
        }
        let ext = self.external_inputs();
        let ext: Vec<&str> = ext.iter().map(String::as_str).collect();
        self.record("ingest", &["synth"], &[], &ext, &outputs)
    }

    fn extract_sets(&self) -> Result<()> {
        let events = read_events(&self.path(EVENTS))?;
        let corpus = extract_sets(&events, self.cfg.min_clicks, self.cfg.group_key);
        if corpus.k() < 2 {
            return Err(Error::Empty(format!(
                "{} document sets extracted; training needs two",
                corpus.k()
            )));
        }
        corpus.write_jsonl(&self.path(SETS))?;
        self.record("extract-sets", &[], &["ingest"], &[EVENTS], &[SETS])
    }

    fn labeler(&self) -> Result<Labeler> {
        let taxonomy: IntentTaxonomy = read_json(&self.path(TAXONOMY))?;
        build_labeler(&self.cfg, taxonomy)
    }

    fn label(&self) -> Result<()> {
        let events = read_events(&self.path(EVENTS))?;
        let taxonomy = resolve_taxonomy(&self.cfg, &events)?;
        let labeler = build_labeler(&self.cfg, taxonomy.clone())?;
        let labels = label_corpus(&events, &labeler, self.cfg.label_threshold);
        if labels.is_empty() {
            return Err(Error::Empty("no query has a routable click".into()));
        }
        let global: HashMap<String, LabelVector> = global_intents(&events, &labeler)
            .into_iter()
            .map(|(q, i)| (q, LabelVector::from_indices(taxonomy.len(), &[i])))
            .collect();
        let sessions = sessionize(&read_events(&self.path(SESSION_EVENTS))?, self.cfg.gap_seconds);
        let rates: Vec<f64> = sessions
            .iter()
            .filter_map(|s| concordance_rate(s, &global, &labeler, IntentMatch::Exact).ok())
            .collect();
        let stats = LabelStats {
            n_queries: click_stats(&events).len(),
            n_labeled: labels.len(),
            multi_label: labels
                .iter()
                .filter(|l| l.labels.0.iter().filter(|&&b| b).count() > 1)
                .count(),
            mean_perplexity: labels.iter().map(|l| l.perplexity).sum::<f64>() / labels.len() as f64,
            concordance_rate: (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64),
        };
        write_json(&self.path(TAXONOMY), &taxonomy)?;
        std::fs::write(self.path(LABELS), labels_to_tsv(&labels, &taxonomy))
            .map_err(|e| Error::io(self.path(LABELS), e))?;
        write_json(&self.path(LABEL_STATS), &stats)?;
        self.record(
            "label",
            &[],
            &["ingest"],
            &[EVENTS, SESSION_EVENTS],
            &[TAXONOMY, LABELS, LABEL_STATS],
        )
    }

    fn train(&self) -> Result<()> {
        let corpus = CoQueryCorpus::read_jsonl(&self.path(SETS))?;
        let mut encoder = EncoderParams::<f64>::new(self.cfg.vocab, self.cfg.dim, self.cfg.hidden, self.seed("init"));
        let log = train_encoder(
            &mut encoder,
            &corpus,
            &encoder_train_config(&self.cfg, self.seed("train")),
        )?;
        encoder.save(&self.path(ENCODER))?;
        write_json(&self.path(TRAIN_LOG), &log)?;
        self.record(
            "train",
            &["init", "train"],
            &["extract-sets"],
            &[SETS],
            &[ENCODER, TRAIN_LOG],
        )
    }

    fn cluster_eval(&self) -> Result<()> {
        let encoder = EncoderParams::<f64>::load(&self.path(ENCODER))?;
        let taxonomy: IntentTaxonomy = read_json(&self.path(TAXONOMY))?;
        let labels = self.query_labels(&taxonomy)?;
        let name = format!("{} cluster", self.cfg.objective);
        let report = cluster_labels(
            &name,
            &encoder,
            &labels,
            self.cfg.kmeans_k,
            self.cfg.kmeans_restarts,
            self.seed("kmeans"),
        )?;
        report.save(&self.path(CLUSTER_REPORT))?;
        self.record(
            "cluster-eval",
            &["kmeans"],
            &["train", "label"],
            &[ENCODER, LABELS, TAXONOMY],
            &[CLUSTER_REPORT],
        )
    }

    fn query_labels(&self, taxonomy: &IntentTaxonomy) -> Result<Vec<QueryLabel>> {
        labels_from_tsv(&read_text(&self.path(LABELS))?, taxonomy)
    }

    fn train_classifier(&self) -> Result<()> {
        let encoder = EncoderParams::<f64>::load(&self.path(ENCODER))?;
        let taxonomy: IntentTaxonomy = read_json(&self.path(TAXONOMY))?;
        let labels = self.query_labels(&taxonomy)?;
        let vectors: Vec<LabelVector> = labels.iter().map(|l| l.labels.clone()).collect();
        let split = stratified_split(&vectors, self.cfg.ratios(), self.cfg.min_group, self.seed("split"))?;
        let pick = |idx: &[usize]| idx.iter().map(|&i| labels[i].query.clone()).collect::<Vec<_>>();
        let splits = QuerySplits {
            train: pick(&split.train),
            val: pick(&split.val),
            test: pick(&split.test),
        };
        let as_inputs = |idx: &[usize]| -> (Vec<SessionInput>, Vec<LabelVector>) {
            idx.iter()
                .map(|&i| (SessionInput::query(&labels[i].query), vectors[i].clone()))
                .unzip()
        };
        let (tr, va, te) = (as_inputs(&split.train), as_inputs(&split.val), as_inputs(&split.test));
        let (t, _, _) = fit_and_score(
            "classifier",
            &encoder,
            [(&tr.0, &tr.1), (&va.0, &va.1), (&te.0, &te.1)],
            &classifier_config(&self.cfg, self.seed("classifier")),
            self.cfg.averaging,
        )?;
        let mut outputs = vec![SPLITS, CLASSIFIER, CLASSIFIER_HISTORY];
        let encoder_checkpoint = match &t.encoder {
            Some(e) => {
                e.save(&self.path(CLASSIFIER_ENCODER))?;
                outputs.push(CLASSIFIER_ENCODER);
                Some(CLASSIFIER_ENCODER.to_string())
            }
            None => None,
        };
        let artifact = ClassifierArtifact {
            intents: taxonomy.names().to_vec(),
            head: t.head.to_stored(),
            thresholds: t.thresholds.clone(),
            context: ContextMode::None,
            max_tokens: self.cfg.max_tokens,
            encoder_checkpoint,
        };
        write_json(&self.path(SPLITS), &splits)?;
        artifact.save(&self.path(CLASSIFIER))?;
        write_json(&self.path(CLASSIFIER_HISTORY), &t.history)?;
        self.record(
            "train-classifier",
            &["split", "classifier"],
            &["train", "label"],
            &[ENCODER, TAXONOMY, LABELS],
            &outputs,
        )
    }

    fn eval(&self) -> Result<()> {
        let taxonomy: IntentTaxonomy = read_json(&self.path(TAXONOMY))?;
        let artifact = ClassifierArtifact::load(&self.path(CLASSIFIER))?;
        let enc_path = artifact.encoder_checkpoint.as_deref().unwrap_or(ENCODER);
        let encoder = EncoderParams::<f64>::load(&self.path(enc_path))?;
        let head = ClassifierHead::<f64>::from_stored(&artifact.head)?;
        let splits: QuerySplits = read_json(&self.path(SPLITS))?;
        let by_query: HashMap<String, LabelVector> = self
            .query_labels(&taxonomy)?
            .into_iter()
            .map(|l| (l.query, l.labels))
            .collect();
        let truth = splits
            .test
            .iter()
            .map(|q| {
                by_query
                    .get(q)
                    .cloned()
                    .ok_or_else(|| Error::ShapeMismatch(format!("test query `{q}` has no label")))
            })
            .collect::<Result<Vec<_>>>()?;
        let tok = encoder.tokenizer();
        let ids: Vec<Vec<usize>> = splits.test.iter().map(|q| SessionInput::query(q).ids(&tok)).collect();
        let probs = probabilities(&encoder, &head, &ids);
        let decided: Vec<LabelVector> = probs.iter().map(|p| artifact.thresholds.decide(p)).collect();
        let name = format!("{} classifier", self.cfg.objective);
        let report = classification_report(&name, &probs, &decided, &truth, self.cfg.averaging)?;
        let preds: Vec<Prediction> = splits
            .test
            .iter()
            .zip(probs)
            .zip(decided)
            .map(|((q, probs), decided)| Prediction {
                id: q.clone(),
                probs,
                decided,
            })
            .collect();
        std::fs::write(
            self.path(PREDICTIONS),
            crate::classify::predictions_to_tsv(&preds, &taxonomy),
        )
        .map_err(|e| Error::io(self.path(PREDICTIONS), e))?;
        report.save(&self.path(EVAL_REPORT))?;
        let mut inputs = vec![CLASSIFIER, SPLITS, LABELS, TAXONOMY, ENCODER];
        if enc_path != ENCODER {
            inputs.push(CLASSIFIER_ENCODER);
        }
        self.record("eval", &[], &["train-classifier"], &inputs, &[PREDICTIONS, EVAL_REPORT])
    }

    fn session_eval(&self) -> Result<()> {
        let encoder = EncoderParams::<f64>::load(&self.path(ENCODER))?;
        let labeler = self.labeler()?;
        let sessions = sessionize(&read_events(&self.path(SESSION_EVENTS))?, self.cfg.gap_seconds);
        let results = session_ablation(
            &sessions,
            &labeler,
            &encoder,
            &self.cfg.contexts,
            &self.cfg,
            self.seed("session-split"),
            self.seed("session-classifier"),
        )?;
        let mut outputs = vec![SESSION_REPORTS.to_string()];
        let mut reports = Vec::new();
        for (mode, report, preds) in results {
            let name = format!("session_predictions_{mode}.tsv");
            std::fs::write(
                self.path(&name),
                crate::classify::predictions_to_tsv(&preds, labeler.taxonomy()),
            )
            .map_err(|e| Error::io(self.path(&name), e))?;
            outputs.push(name);
            reports.push(report);
        }
        save_reports(&self.path(SESSION_REPORTS), &reports)?;
        let outputs: Vec<&str> = outputs.iter().map(String::as_str).collect();
        self.record(
            "session-eval",
            &["session-split", "session-classifier"],
            &["train", "label"],
            &[ENCODER, SESSION_EVENTS, TAXONOMY],
            &outputs,
        )
    }
}

/// Validate `cfg`, run every stage, and verify the manifest chain.
pub fn run_pipeline(cfg: RunConfig) -> Result<PathBuf> {
    let p = Pipeline::new(cfg)?;
    p.run_all()?;
    Ok(p.root)
}
