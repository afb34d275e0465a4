use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cluster id per item, contiguous from 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition(Vec<usize>);

impl Partition {
    /// Relabel arbitrary ids to `0..k` in order of first appearance.
    pub fn from_labels<L: std::hash::Hash + Eq>(labels: impl IntoIterator<Item = L>) -> Self {
        let mut ids: HashMap<L, usize> = HashMap::new();
        Partition(
            labels
                .into_iter()
                .map(|l| {
                    let next = ids.len();
                    *ids.entry(l).or_insert(next)
                })
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.0.iter().max().map_or(0, |m| m + 1)
    }
}

struct Contingency {
    n: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    cells: HashMap<(usize, usize), usize>,
}

fn contingency(pred: &Partition, truth: &Partition) -> Result<Contingency> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "partitions of {} and {} items",
            pred.len(),
            truth.len()
        )));
    }
    let mut rows = vec![0; pred.n_clusters()];
    let mut cols = vec![0; truth.n_clusters()];
    let mut cells = HashMap::new();
    for (&p, &t) in pred.0.iter().zip(&truth.0) {
        rows[p] += 1;
        cols[t] += 1;
        *cells.entry((p, t)).or_insert(0) += 1;
    }
    Ok(Contingency {
        n: pred.len(),
        rows,
        cols,
        cells,
    })
}

fn comb2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index from the contingency table.
pub fn ari(pred: &Partition, truth: &Partition) -> Result<f64> {
    let t = contingency(pred, truth)?;
    let index: f64 = t.cells.values().map(|&c| comb2(c)).sum();
    let a: f64 = t.rows.iter().map(|&c| comb2(c)).sum();
    let b: f64 = t.cols.iter().map(|&c| comb2(c)).sum();
    let pairs = comb2(t.n);
    if pairs == 0.0 {
        return Ok(1.0);
    }
    let expected = a * b / pairs;
    let max = 0.5 * (a + b);
    if max == expected {
        // both single-cluster, or both all-singletons
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

fn same_partition(a: &Partition, b: &Partition) -> bool {
    Partition::from_labels(a.0.iter().copied()) == Partition::from_labels(b.0.iter().copied())
}

/// Mutual information normalized by the arithmetic mean of the two entropies.
pub fn nmi(pred: &Partition, truth: &Partition) -> Result<f64> {
    let t = contingency(pred, truth)?;
    if t.n == 0 {
        return Ok(1.0);
    }
    let n = t.n as f64;
    let (hp, ht) = (entropy(&t.rows, n), entropy(&t.cols, n));
    if hp == 0.0 || ht == 0.0 {
        return Ok(if same_partition(pred, truth) { 1.0 } else { 0.0 });
    }
    let mut keys: Vec<_> = t.cells.iter().collect();
    keys.sort_unstable();
    let mi: f64 = keys
        .into_iter()
        .map(|(&(i, j), &c)| {
            let c = c as f64;
            c / n * (n * c / (t.rows[i] as f64 * t.cols[j] as f64)).ln()
        })
        .sum();
    Ok((mi / (0.5 * (hp + ht))).clamp(0.0, 1.0))
}
