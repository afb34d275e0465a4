use std::path::Path;

use clickrep::pipeline::{
    run_pipeline, summary_csv, summary_from_csv, summary_table, verify_chain, Pipeline, RunConfig, RunSummary, STAGES,
};
use clickrep::Error;

fn small(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::parse_str(
        "synth_queries = 160\nsynth_sessions = 150\nvocab = 4096\ndim = 16\nhidden = 16\nclf_epochs = 10\nkmeans_restarts = 2\n",
    )
    .unwrap();
    cfg.out_dir = out.to_path_buf();
    cfg
}

const METRIC_FILES: [&str; 3] = ["cluster_report.json", "eval_report.json", "session_eval.json"];

#[test]
fn full_run_is_complete_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_pipeline(small(&dir.path().join("a"))).unwrap();
    let b = run_pipeline(small(&dir.path().join("b"))).unwrap();
    for stage in STAGES {
        assert!(a.join(format!("{stage}.manifest.json")).is_file(), "{stage}");
    }
    verify_chain(&a, &STAGES).unwrap();
    for f in METRIC_FILES {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let rows = vec![RunSummary::load(&a).unwrap(), RunSummary::load(&b).unwrap()];
    assert!(rows
        .iter()
        .all(|r| r.ari.is_some() && r.f1.is_some() && r.session_f1.iter().all(Option::is_some)));
    assert_eq!(summary_table(&rows).lines().count(), 3);
    assert_eq!(summary_from_csv(&summary_csv(&rows)).unwrap(), rows);
}

#[test]
fn tampering_is_caught_downstream() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(small(dir.path())).unwrap();
    for stage in &STAGES[..4] {
        p.run_stage(stage).unwrap();
    }
    let labels = dir.path().join("labels.tsv");
    let mut text = std::fs::read_to_string(&labels).unwrap();
    text.push_str("injected query\ttopic0\t1\n");
    std::fs::write(&labels, text).unwrap();
    let err = p.run_stage("cluster-eval").unwrap_err();
    assert!(
        matches!(&err, Error::Stage { cause, .. } if matches!(**cause, Error::Manifest(_))),
        "{err}"
    );
    assert_eq!(err.exit_code(), 6);
}

#[test]
fn objectives_give_comparable_reports() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = Vec::new();
    for obj in ["multiset", "pairwise"] {
        let mut cfg = small(&dir.path().join(obj));
        cfg.set("objective", obj).unwrap();
        cfg.set("contexts", "none").unwrap();
        rows.push(RunSummary::load(&run_pipeline(cfg).unwrap()).unwrap());
    }
    assert_eq!(rows[0].objective, "multiset");
    assert_eq!(rows[1].objective, "pairwise");
    assert!(rows
        .iter()
        .all(|r| r.ari.is_some() && r.session_f1[0].is_some() && r.session_f1[3].is_none()));
}

#[test]
fn missing_session_artifact_leaves_blanks() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(small(dir.path())).unwrap();
    for stage in &STAGES[..7] {
        p.run_stage(stage).unwrap();
    }
    let row = RunSummary::load(dir.path()).unwrap();
    assert!(row.f1.is_some());
    assert_eq!(row.session_f1, [None; 4]);
    let table = summary_table(&[row]);
    assert!(table
        .lines()
        .nth(1)
        .unwrap()
        .trim_end()
        .ends_with(|c: char| c.is_ascii_digit()));
}

#[test]
fn stage_failure_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.set("min_clicks", "1000000").unwrap();
    let err = run_pipeline(cfg).unwrap_err();
    assert!(err.to_string().contains("extract-sets"), "{err}");
}
