use std::path::Path;
use std::process::{Command, Output};

fn clickrep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clickrep"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = clickrep(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

#[test]
fn subcommands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[
        "synth-gen",
        "--queries",
        "120",
        "--sessions",
        "120",
        "--out",
        &p(d, "synth"),
    ]);
    let events = p(d, "synth/events.tsv");
    ok(&["ingest", "--input", &events, "--out", &p(d, "events.tsv")]);
    assert_eq!(
        std::fs::read(&events).unwrap(),
        std::fs::read(d.join("events.tsv")).unwrap()
    );
    ok(&["extract-sets", "--events", &events, "--out", &p(d, "sets.jsonl")]);
    ok(&["label", "--events", &events, "--out", &p(d, "labels.tsv")]);
    assert!(d.join("taxonomy.json").is_file());
    let enc = p(d, "encoder.json");
    ok(&[
        "train",
        "--sets",
        &p(d, "sets.jsonl"),
        "--out",
        &enc,
        "--vocab",
        "2048",
        "--dim",
        "16",
        "--hidden",
        "16",
    ]);

    std::fs::write(d.join("queries.txt"), "w0x1 w0x2\nw1x3\n").unwrap();
    ok(&[
        "embed",
        "--checkpoint",
        &enc,
        "--queries",
        &p(d, "queries.txt"),
        "--out",
        &p(d, "emb.tsv"),
    ]);
    let emb = std::fs::read_to_string(d.join("emb.tsv")).unwrap();
    assert_eq!(emb.lines().count(), 2);
    assert_eq!(emb.lines().next().unwrap().split('\t').count(), 17);

    let (labels, tax) = (p(d, "labels.tsv"), p(d, "taxonomy.json"));
    let table = ok(&[
        "cluster-eval",
        "--checkpoint",
        &enc,
        "--labels",
        &labels,
        "--taxonomy",
        &tax,
        "--restarts",
        "2",
        "--out",
        &p(d, "cluster.json"),
    ]);
    assert!(table.contains("ari"));
    ok(&[
        "train-classifier",
        "--checkpoint",
        &enc,
        "--labels",
        &labels,
        "--taxonomy",
        &tax,
        "--epochs",
        "5",
        "--out",
        &p(d, "clf"),
    ]);
    let eval = ok(&[
        "eval",
        "--predictions",
        &p(d, "clf/predictions.tsv"),
        "--truth",
        &labels,
        "--taxonomy",
        &tax,
        "--out",
        &p(d, "eval.json"),
    ]);
    assert!(eval.contains("f1"));
    // the stored test report and the re-scored predictions agree
    let a: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("clf/test_report.json")).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("eval.json")).unwrap()).unwrap();
    assert_eq!(a["f1"], b["f1"]);

    ok(&[
        "session-eval",
        "--checkpoint",
        &enc,
        "--sessions",
        &p(d, "synth/session_events.tsv"),
        "--taxonomy",
        &tax,
        "--context",
        "none,all",
        "--epochs",
        "5",
        "--out",
        &p(d, "sess"),
    ]);
    assert!(d.join("sess/session_predictions_all.tsv").is_file());
    assert!(!d.join("sess/session_predictions_page.tsv").exists());

    let csv = ok(&["bench-loss", "--ns", "10,20", "--trials", "1"]);
    assert!(csv.lines().count() >= 5);
}

#[test]
fn run_report_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = "synth_queries = 120\nsynth_sessions = 100\nvocab = 2048\ndim = 16\nhidden = 16\nclf_epochs = 5\nkmeans_restarts = 2\n";
    std::fs::write(d.join("run.conf"), cfg).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_clickrep"))
        .args(["run", "--config", &p(d, "run.conf"), "--out", &p(d, "r1")])
        .env("CLICKREP_OBJECTIVE", "pairwise")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("pairwise"));
    ok(&["run", "--config", &p(d, "run.conf"), "--out", &p(d, "r2")]);
    ok(&["verify", "--run", &p(d, "r1")]);

    let table = ok(&[
        "report",
        "--runs",
        &p(d, "r1"),
        &p(d, "r2"),
        "--csv",
        &p(d, "report.csv"),
    ]);
    assert_eq!(table.lines().count(), 3);
    let csv = std::fs::read_to_string(d.join("report.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("r1,pairwise,"));
    assert!(csv.lines().nth(2).unwrap().starts_with("r2,multiset,"));

    std::fs::write(d.join("r1/sets.jsonl"), "{}").unwrap();
    assert_eq!(clickrep(&["verify", "--run", &p(d, "r1")]).status.code(), Some(6));

    std::fs::remove_file(d.join("r2/session_eval.json")).unwrap();
    let out = clickrep(&["report", "--runs", &p(d, "r2")]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("session_eval.json"));
}

#[test]
fn failure_classes_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.conf"), "epochz = 3\n").unwrap();
    assert_eq!(clickrep(&["run", "--config", &p(d, "bad.conf")]).status.code(), Some(2));
    assert_eq!(
        clickrep(&["ingest", "--input", &p(d, "nope.tsv"), "--out", &p(d, "x.tsv")])
            .status
            .code(),
        Some(3)
    );
    std::fs::write(d.join("log.tsv"), "a\tb\n1\t2\n").unwrap();
    assert_eq!(
        clickrep(&["ingest", "--input", &p(d, "log.tsv"), "--out", &p(d, "x.tsv")])
            .status
            .code(),
        Some(4)
    );
    assert_eq!(
        clickrep(&[
            "ingest",
            "--input",
            &p(d, "log.tsv"),
            "--format",
            "xml",
            "--out",
            &p(d, "x.tsv")
        ])
        .status
        .code(),
        Some(4)
    );
    let defaults = ok(&["run", "--print-defaults"]);
    assert!(defaults.contains("objective = multiset"));
}
