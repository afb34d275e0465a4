use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clickrep::classify::{
    predictions_from_tsv, predictions_to_tsv, ClassifierArtifact, ContextMode, Prediction, SessionInput,
};
use clickrep::clicklog::{
    parse_log, sessionize, synth_generate, write_canonical, LogFormat, SynthSpec, DEFAULT_GAP_SECONDS,
};
use clickrep::cosets::{extract_sets, CoQueryCorpus, GroupKey};
use clickrep::eval::{classification_report, stratified_split, table, Averaging, MetricReport};
use clickrep::labeling::{label_corpus, labels_from_tsv, labels_to_tsv, IntentTaxonomy, LabelVector, QueryLabel};
use clickrep::losses::{bench_complexity, bench_to_csv, Objective};
use clickrep::pipeline::{
    build_labeler, cluster_labels, encoder_train_config, fit_and_score, read_json, resolve_taxonomy, run_pipeline,
    save_reports, session_ablation, summary_csv, summary_table, verify_chain, write_json, write_synth, QuerySplits,
    RunConfig, RunSummary, STAGES,
};
use clickrep::training::train_encoder;
use clickrep::{Encoder, Error, Result};

#[derive(Parser)]
#[command(
    name = "clickrep",
    version,
    about = "Query representations and intent classifiers from click logs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a click log and write it in canonical TSV.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "canonical-tsv")]
        format: String,
        #[arg(long, default_value_t = DEFAULT_GAP_SECONDS)]
        gap_seconds: i64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a planted-intent corpus with sessions.
    SynthGen {
        #[arg(long, default_value_t = 8)]
        intents: usize,
        #[arg(long, default_value_t = 400)]
        queries: usize,
        #[arg(long, default_value_t = 600)]
        sessions: usize,
        #[arg(long, default_value_t = 0.4)]
        drift: f64,
        #[arg(long, default_value_t = 0.3)]
        overlap: f64,
        #[arg(long, default_value_t = 4)]
        min_session_len: usize,
        #[arg(long, default_value_t = 4)]
        max_session_len: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output directory: events.tsv, session_events.tsv, synth_truth.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Group co-clicked queries into weighted document sets (JSONL).
    ExtractSets {
        #[arg(long)]
        events: PathBuf,
        #[arg(long, default_value_t = 3)]
        min_clicks: u64,
        #[arg(long, default_value = "doc_type")]
        key: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Derive intent labels and perplexity for every query from its clicks.
    Label {
        #[arg(long)]
        events: PathBuf,
        #[command(flatten)]
        taxonomy: TaxonomyArgs,
        #[arg(long, default_value_t = 0.2)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the taxonomy; defaults to taxonomy.json next to `out`.
        #[arg(long)]
        taxonomy_out: Option<PathBuf>,
    },
    /// Train the query encoder on document sets.
    Train {
        #[arg(long)]
        sets: PathBuf,
        #[arg(long, default_value = "multiset")]
        objective: String,
        #[command(flatten)]
        encoder: EncoderArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Embed one query per line of `queries`.
    Embed {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// k-means on query embeddings scored against label combinations.
    ClusterEval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
        /// 0 uses the number of distinct label combinations.
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the multi-label classifier head with per-intent thresholds.
    TrainClassifier {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
        #[arg(long, default_value = "bce")]
        objective: String,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        freeze_encoder: bool,
        /// Existing splits JSON; a stratified 60:20:20 split is drawn when absent.
        #[arg(long)]
        splits: Option<PathBuf>,
        #[command(flatten)]
        clf: ClassifierArgs,
        /// Output directory: classifier.json, splits.json, predictions.tsv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against labels.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
        #[arg(long, default_value = "micro")]
        averaging: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and score one classifier per session-context mode.
    SessionEval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Repeatable; all four modes when omitted.
        #[arg(long, value_delimiter = ',')]
        context: Vec<String>,
        #[arg(long, default_value_t = 4)]
        min_len: usize,
        #[arg(long, default_value_t = 4)]
        max_len: usize,
        #[arg(long, default_value_t = DEFAULT_GAP_SECONDS)]
        gap_seconds: i64,
        #[command(flatten)]
        clf: ClassifierArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time the multiset and pairwise losses as N grows.
    BenchLoss {
        #[arg(long, value_delimiter = ',', default_value = "4")]
        ks: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "100,200,400")]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Side-by-side table of finished runs.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run every stage from a key = value config; CLICKREP_<KEY> variables override it.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the documented default config and exit.
        #[arg(long)]
        print_defaults: bool,
    },
    /// Re-hash every artifact of a run against its manifests.
    Verify {
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Args)]
struct TaxonomyArgs {
    /// Comma-separated intent names; default is the document types of the log.
    #[arg(long, value_delimiter = ',')]
    intents: Vec<String>,
    /// JSON list of {intent, pattern} URL rules.
    #[arg(long)]
    rules: Option<PathBuf>,
}

#[derive(Args)]
struct EncoderArgs {
    #[arg(long, default_value_t = 32768)]
    vocab: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 128)]
    hidden: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 3)]
    epochs: usize,
    #[arg(long, default_value_t = 8)]
    batch_sets: usize,
    #[arg(long, default_value_t = 8)]
    queries_per_set: usize,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long)]
    leave_one_out: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ClassifierArgs {
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 5e-2)]
    head_lr: f64,
    #[arg(long, default_value_t = 5)]
    patience: usize,
    #[arg(long, default_value_t = 64)]
    max_tokens: usize,
    #[arg(long, default_value = "micro")]
    averaging: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ClassifierArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        cfg.clf_epochs = self.epochs;
        cfg.clf_batch_size = self.batch_size;
        cfg.clf_head_lr = self.head_lr;
        cfg.clf_patience = self.patience;
        cfg.max_tokens = self.max_tokens;
        cfg.set("averaging", &self.averaging)
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io(path, e))
}

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| io(path, e))
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))
}

fn load_labels(labels: &Path, taxonomy: &Path) -> Result<(IntentTaxonomy, Vec<QueryLabel>)> {
    let tax: IntentTaxonomy = read_json(taxonomy)?;
    let labels = labels_from_tsv(&read(labels)?, &tax)?;
    Ok((tax, labels))
}

fn canonical_events(path: &Path) -> Result<Vec<clickrep::clicklog::ClickEvent>> {
    Ok(parse_log(path, LogFormat::CanonicalTsv)?.events)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest {
            input,
            format,
            gap_seconds,
            out,
        } => {
            let report = parse_log(&input, format.parse()?)?;
            for (line, why) in report.problems.iter().take(5) {
                log::warn!("line {line}: {why}");
            }
            write_canonical(&out, &report.events)?;
            let sessions = sessionize(&report.events, gap_seconds.max(1));
            println!(
                "{} events ({} malformed rows skipped), {} sessions",
                report.events.len(),
                report.malformed,
                sessions.len()
            );
        }
        Command::SynthGen {
            intents,
            queries,
            sessions,
            drift,
            overlap,
            min_session_len,
            max_session_len,
            seed,
            out,
        } => {
            let corpus = synth_generate(&SynthSpec {
                n_intents: intents,
                n_queries: queries,
                vocab_overlap: overlap,
                n_sessions: sessions,
                drift_prob: drift,
                seed,
                min_session_len,
                max_session_len,
                ..SynthSpec::default()
            })?;
            write_synth(&corpus, &out)?;
            println!(
                "{} global events, {} session clicks, drift fraction {:.3}",
                corpus.global_log.len(),
                corpus.session_log.len(),
                corpus.drift_fraction()
            );
        }
        Command::ExtractSets {
            events,
            min_clicks,
            key,
            out,
        } => {
            let corpus = extract_sets(&canonical_events(&events)?, min_clicks, key.parse::<GroupKey>()?);
            corpus.write_jsonl(&out)?;
            let members: usize = corpus.sets.iter().map(|s| s.n_members()).sum();
            println!("{} sets, {} memberships", corpus.k(), members);
        }
        Command::Label {
            events,
            taxonomy,
            threshold,
            out,
            taxonomy_out,
        } => {
            let events = canonical_events(&events)?;
            let mut cfg = RunConfig {
                intents: taxonomy.intents,
                rules_path: taxonomy.rules,
                ..RunConfig::default()
            };
            cfg.label_threshold = threshold;
            let tax = resolve_taxonomy(&cfg, &events)?;
            let labeler = build_labeler(&cfg, tax.clone())?;
            let labels = label_corpus(&events, &labeler, threshold);
            write(&out, &labels_to_tsv(&labels, &tax))?;
            let tax_path = taxonomy_out.unwrap_or_else(|| out.with_file_name("taxonomy.json"));
            write_json(&tax_path, &tax)?;
            println!("{} labeled queries over {} intents", labels.len(), tax.len());
        }
        Command::Train {
            sets,
            objective,
            encoder,
            out,
        } => {
            let corpus = CoQueryCorpus::read_jsonl(&sets)?;
            let mut cfg = RunConfig {
                objective: objective.parse::<Objective>()?,
                vocab: encoder.vocab,
                dim: encoder.dim,
                hidden: encoder.hidden,
                lr: encoder.lr,
                epochs: encoder.epochs,
                sets_per_batch: encoder.batch_sets,
                queries_per_set: encoder.queries_per_set,
                leave_one_out: encoder.leave_one_out,
                ..RunConfig::default()
            };
            cfg.epsilon = encoder.epsilon;
            let mut enc = Encoder::new(cfg.vocab, cfg.dim, cfg.hidden, encoder.seed);
            let log = train_encoder(&mut enc, &corpus, &encoder_train_config(&cfg, encoder.seed))?;
            enc.save(&out)?;
            println!("{} steps; epoch losses {:?}", log.steps, log.epoch_loss);
        }
        Command::Embed {
            checkpoint,
            queries,
            out,
        } => {
            let enc = Encoder::load(&checkpoint)?;
            let mut text = String::new();
            for q in read(&queries)?.lines().map(str::trim).filter(|q| !q.is_empty()) {
                let e = enc.encode(q);
                text.push_str(q);
                for v in e {
                    text.push('\t');
                    text.push_str(&v.to_string());
                }
                text.push('\n');
            }
            write(&out, &text)?;
        }
        Command::ClusterEval {
            checkpoint,
            labels,
            taxonomy,
            k,
            restarts,
            seed,
            out,
        } => {
            let enc = Encoder::load(&checkpoint)?;
            let (_, labels) = load_labels(&labels, &taxonomy)?;
            let report = cluster_labels("cluster", &enc, &labels, k, restarts, seed)?;
            report.save(&out)?;
            print!("{}", report.to_table());
        }
        Command::TrainClassifier {
            checkpoint,
            labels,
            taxonomy,
            objective,
            freeze_encoder,
            splits,
            clf,
            out,
        } => {
            if objective.parse::<Objective>()? != Objective::Bce {
                return Err(Error::InvalidArgument(format!(
                    "the classifier is trained with the bce objective, not `{objective}`"
                )));
            }
            let enc = Encoder::load(&checkpoint)?;
            let (tax, labels) = load_labels(&labels, &taxonomy)?;
            let mut cfg = RunConfig::default();
            clf.apply(&mut cfg)?;
            cfg.freeze_encoder = freeze_encoder;
            let splits = match splits {
                Some(p) => read_json::<QuerySplits>(&p)?,
                None => {
                    let vectors: Vec<LabelVector> = labels.iter().map(|l| l.labels.clone()).collect();
                    let s = stratified_split(&vectors, cfg.ratios(), cfg.min_group, clf.seed)?;
                    let pick = |idx: &[usize]| idx.iter().map(|&i| labels[i].query.clone()).collect();
                    QuerySplits {
                        train: pick(&s.train),
                        val: pick(&s.val),
                        test: pick(&s.test),
                    }
                }
            };
            let by_query: std::collections::HashMap<&str, &LabelVector> =
                labels.iter().map(|l| (l.query.as_str(), &l.labels)).collect();
            let part = |qs: &[String]| -> Result<(Vec<SessionInput>, Vec<LabelVector>)> {
                qs.iter()
                    .map(|q| {
                        let l = by_query
                            .get(q.as_str())
                            .ok_or_else(|| Error::ShapeMismatch(format!("split query `{q}` has no label")))?;
                        Ok((SessionInput::query(q), (*l).clone()))
                    })
                    .collect::<Result<Vec<_>>>()
                    .map(|v| v.into_iter().unzip())
            };
            let (tr, va, te) = (part(&splits.train)?, part(&splits.val)?, part(&splits.test)?);
            let clf_cfg = clickrep::classify::ClassifierConfig {
                epochs: cfg.clf_epochs,
                batch_size: cfg.clf_batch_size,
                head_lr: cfg.clf_head_lr,
                encoder_lr: cfg.clf_encoder_lr,
                patience: cfg.clf_patience,
                freeze_encoder,
                seed: clf.seed,
            };
            let (t, report, probs) = fit_and_score(
                "classifier",
                &enc,
                [(&tr.0, &tr.1), (&va.0, &va.1), (&te.0, &te.1)],
                &clf_cfg,
                cfg.averaging,
            )?;
            mkdir(&out)?;
            let encoder_checkpoint = match &t.encoder {
                Some(e) => {
                    e.save(&out.join("classifier_encoder.json"))?;
                    Some("classifier_encoder.json".to_string())
                }
                None => None,
            };
            ClassifierArtifact {
                intents: tax.names().to_vec(),
                head: t.head.to_stored(),
                thresholds: t.thresholds.clone(),
                context: ContextMode::None,
                max_tokens: cfg.max_tokens,
                encoder_checkpoint,
            }
            .save(&out.join("classifier.json"))?;
            write_json(&out.join("splits.json"), &splits)?;
            let preds: Vec<Prediction> = splits
                .test
                .iter()
                .zip(probs)
                .map(|(q, p)| Prediction {
                    id: q.clone(),
                    decided: t.thresholds.decide(&p),
                    probs: p,
                })
                .collect();
            write(&out.join("predictions.tsv"), &predictions_to_tsv(&preds, &tax))?;
            report.save(&out.join("test_report.json"))?;
            print!("{}", report.to_table());
        }
        Command::Eval {
            predictions,
            truth,
            taxonomy,
            averaging,
            out,
        } => {
            let (tax, labels) = load_labels(&truth, &taxonomy)?;
            let preds = predictions_from_tsv(&read(&predictions)?, &tax)?;
            let by_query: std::collections::HashMap<&str, &LabelVector> =
                labels.iter().map(|l| (l.query.as_str(), &l.labels)).collect();
            let truth = preds
                .iter()
                .map(|p| {
                    by_query
                        .get(p.id.as_str())
                        .map(|l| (*l).clone())
                        .ok_or_else(|| Error::ShapeMismatch(format!("prediction `{}` has no truth row", p.id)))
                })
                .collect::<Result<Vec<_>>>()?;
            let scores: Vec<Vec<f64>> = preds.iter().map(|p| p.probs.clone()).collect();
            let decided: Vec<LabelVector> = preds.iter().map(|p| p.decided.clone()).collect();
            let report = classification_report("eval", &scores, &decided, &truth, averaging.parse::<Averaging>()?)?;
            if let Some(out) = out {
                report.save(&out)?;
            }
            print!("{}", report.to_table());
        }
        Command::SessionEval {
            checkpoint,
            sessions,
            taxonomy,
            rules,
            context,
            min_len,
            max_len,
            gap_seconds,
            clf,
            out,
        } => {
            let enc = Encoder::load(&checkpoint)?;
            let tax: IntentTaxonomy = read_json(&taxonomy)?;
            let mut cfg = RunConfig {
                rules_path: rules,
                session_min_len: min_len,
                session_max_len: max_len,
                ..RunConfig::default()
            };
            clf.apply(&mut cfg)?;
            if !context.is_empty() {
                cfg.set("contexts", &context.join(","))?;
            }
            cfg.validate()?;
            let labeler = build_labeler(&cfg, tax.clone())?;
            let sessions = sessionize(&canonical_events(&sessions)?, gap_seconds.max(1));
            let results = session_ablation(&sessions, &labeler, &enc, &cfg.contexts, &cfg, clf.seed, clf.seed)?;
            mkdir(&out)?;
            let mut reports: Vec<MetricReport> = Vec::new();
            for (mode, report, preds) in results {
                write(
                    &out.join(format!("session_predictions_{mode}.tsv")),
                    &predictions_to_tsv(&preds, &tax),
                )?;
                reports.push(report);
            }
            save_reports(&out.join("session_eval.json"), &reports)?;
            print!("{}", table(&reports));
        }
        Command::BenchLoss {
            ks,
            ns,
            trials,
            dim,
            seed,
            out,
        } => {
            let csv = bench_to_csv(&bench_complexity(&ks, &ns, trials, dim, seed));
            match out {
                Some(p) => write(&p, &csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Report { runs, csv } => {
            let rows = runs.iter().map(|r| RunSummary::load(r)).collect::<Result<Vec<_>>>()?;
            print!("{}", summary_table(&rows));
            if let Some(p) = csv {
                write(&p, &summary_csv(&rows))?;
            }
        }
        Command::Run {
            config,
            out,
            print_defaults,
        } => {
            if print_defaults {
                print!("{}", RunConfig::default().to_text());
                return Ok(());
            }
            let mut cfg = match config {
                Some(p) => RunConfig::load(&p)?,
                None => RunConfig::default(),
            };
            cfg.apply_env(std::env::vars())?;
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            let root = run_pipeline(cfg)?;
            print!("{}", summary_table(&[RunSummary::load(&root)?]));
        }
        Command::Verify { run } => {
            verify_chain(&run, &STAGES)?;
            println!("{}: manifest chain intact", run.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = u8::try_from(e.exit_code()).unwrap_or(1);
            ExitCode::from(code)
        }
    }
}
