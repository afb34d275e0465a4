use std::fmt::Write as _;
use std::path::Path;

use crate::classify::ContextMode;
use crate::error::{Error, Result};
use crate::eval::MetricReport;

use super::{CLUSTER_REPORT, CONFIG_SNAPSHOT, EVAL_REPORT, SESSION_REPORTS};

/// One row of the comparison table: a run's headline numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run: String,
    pub objective: String,
    pub ari: Option<f64>,
    pub nmi: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub hit_rate_3: Option<f64>,
    pub ndcg_3: Option<f64>,
    /// Session F1 for none, prev-query, page, all.
    pub session_f1: [Option<f64>; 4],
}

pub fn summary_columns() -> Vec<String> {
    let mut cols: Vec<String> = ["run", "objective", "ARI", "NMI", "P", "F1", "HR@3", "NDCG@3"]
        .into_iter()
        .map(String::from)
        .collect();
    cols.extend(ContextMode::ALL_MODES.iter().map(|m| format!("F1 {m}")));
    cols
}

fn session_mode(report_name: &str) -> Option<usize> {
    let mode = report_name.strip_prefix("session ")?;
    ContextMode::ALL_MODES.iter().position(|m| m.to_string() == mode)
}

impl RunSummary {
    /// Read whatever artifacts `dir` holds; each missing one is logged and left blank.
    pub fn load(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::Empty(format!("run directory {} does not exist", dir.display())));
        }
        let run = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        let mut s = RunSummary {
            run,
            objective: String::new(),
            ari: None,
            nmi: None,
            precision: None,
            f1: None,
            hit_rate_3: None,
            ndcg_3: None,
            session_f1: [None; 4],
        };
        let missing = |name: &str| log::warn!("{}: missing artifact {name}", dir.display());

        match std::fs::read_to_string(dir.join(CONFIG_SNAPSHOT)) {
            Ok(text) => {
                s.objective = super::RunConfig::parse_str(&text)
                    .map(|c| c.objective.to_string())
                    .unwrap_or_default()
            }
            Err(_) => missing(CONFIG_SNAPSHOT),
        }
        match MetricReport::load(&dir.join(CLUSTER_REPORT)) {
            Ok(r) => {
                s.ari = r.ari;
                s.nmi = r.nmi;
            }
            Err(_) => missing(CLUSTER_REPORT),
        }
        match MetricReport::load(&dir.join(EVAL_REPORT)) {
            Ok(r) => {
                s.precision = r.precision;
                s.f1 = r.f1;
                s.hit_rate_3 = r.hit_rate_3;
                s.ndcg_3 = r.ndcg_3;
            }
            Err(_) => missing(EVAL_REPORT),
        }
        match load_reports(&dir.join(SESSION_REPORTS)) {
            Ok(reports) => {
                for r in reports {
                    if let Some(i) = session_mode(&r.name) {
                        s.session_f1[i] = r.f1;
                    }
                }
            }
            Err(_) => missing(SESSION_REPORTS),
        }
        Ok(s)
    }

    fn cells(&self) -> Vec<String> {
        let num = |v: &Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
        let mut out = vec![self.run.clone(), self.objective.clone()];
        out.extend(
            [
                &self.ari,
                &self.nmi,
                &self.precision,
                &self.f1,
                &self.hit_rate_3,
                &self.ndcg_3,
            ]
            .map(num),
        );
        out.extend(self.session_f1.iter().map(num));
        out
    }

    fn csv_cells(&self) -> Vec<String> {
        let num = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = vec![self.run.clone(), self.objective.clone()];
        out.extend(
            [
                &self.ari,
                &self.nmi,
                &self.precision,
                &self.f1,
                &self.hit_rate_3,
                &self.ndcg_3,
            ]
            .map(num),
        );
        out.extend(self.session_f1.iter().map(num));
        out
    }
}

pub fn load_reports(path: &Path) -> Result<Vec<MetricReport>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

pub fn save_reports(path: &Path, reports: &[MetricReport]) -> Result<()> {
    let text = serde_json::to_string_pretty(reports).map_err(|e| Error::json("reports", e))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Aligned text table, one row per run; missing values stay blank.
pub fn summary_table(rows: &[RunSummary]) -> String {
    let header = summary_columns();
    let body: Vec<Vec<String>> = rows.iter().map(RunSummary::cells).collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            body.iter()
                .map(|r| r[c].len())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in std::iter::once(&header).chain(&body) {
        let line: Vec<String> = row.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Comma-separated form of [`summary_table`] with full-precision numbers.
pub fn summary_csv(rows: &[RunSummary]) -> String {
    let mut out = summary_columns().join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_cells().iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => fields.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    fields.push(cur);
    fields
}

pub fn summary_from_csv(text: &str) -> Result<Vec<RunSummary>> {
    let mut lines = text.lines();
    let header = split_csv_line(lines.next().unwrap_or_default());
    if header != summary_columns() {
        return Err(Error::Parse("summary CSV header does not match".into()));
    }
    let num = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse()
                .map(Some)
                .map_err(|_| Error::Parse(format!("bad number `{s}`")))
        }
    };
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f = split_csv_line(line);
            if f.len() != header.len() {
                return Err(Error::Parse(format!(
                    "summary row has {} fields, expected {}",
                    f.len(),
                    header.len()
                )));
            }
            Ok(RunSummary {
                run: f[0].clone(),
                objective: f[1].clone(),
                ari: num(&f[2])?,
                nmi: num(&f[3])?,
                precision: num(&f[4])?,
                f1: num(&f[5])?,
                hit_rate_3: num(&f[6])?,
                ndcg_3: num(&f[7])?,
                session_f1: [num(&f[8])?, num(&f[9])?, num(&f[10])?, num(&f[11])?],
            })
        })
        .collect()
}
