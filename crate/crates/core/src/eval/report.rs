use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clustering and classification results of one run. Metrics that were not
/// computed stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub name: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub hit_rate_3: Option<f64>,
    pub ndcg_3: Option<f64>,
    pub ari: Option<f64>,
    pub nmi: Option<f64>,
    /// Samples scored by the classification metrics.
    pub n_samples: usize,
    /// Samples left out of NDCG for lacking a relevant label.
    pub ndcg_excluded: usize,
    /// Items clustered.
    pub n_clustered: usize,
    pub notes: Vec<String>,
}

pub const METRIC_COLUMNS: [&str; 7] = ["precision", "recall", "f1", "hit_rate_3", "ndcg_3", "ari", "nmi"];

impl MetricReport {
    pub fn new(name: impl Into<String>) -> Self {
        MetricReport {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn metric(&self, column: &str) -> Option<f64> {
        match column {
            "precision" => self.precision,
            "recall" => self.recall,
            "f1" => self.f1,
            "hit_rate_3" => self.hit_rate_3,
            "ndcg_3" => self.ndcg_3,
            "ari" => self.ari,
            "nmi" => self.nmi,
            _ => None,
        }
    }

    /// Check the documented value ranges.
    pub fn validate(&self) -> Result<()> {
        for col in METRIC_COLUMNS {
            if let Some(v) = self.metric(col) {
                let lo = if col == "ari" { -1.0 } else { 0.0 };
                if !(lo..=1.0).contains(&v) {
                    return Err(Error::InvalidArgument(format!("{col} = {v} out of range")));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("metric report", e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("metric report", e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_table(&self) -> String {
        table(std::slice::from_ref(self))
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.4}"))
}

/// Aligned text table with one row per report; missing metrics are blank.
pub fn table(reports: &[MetricReport]) -> String {
    let mut rows = vec![std::iter::once("run".to_string())
        .chain(METRIC_COLUMNS.iter().map(|c| c.to_string()))
        .collect::<Vec<_>>()];
    for r in reports {
        rows.push(
            std::iter::once(r.name.clone())
                .chain(METRIC_COLUMNS.iter().map(|c| cell(r.metric(c))))
                .collect(),
        );
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (v, &w))| if i == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
