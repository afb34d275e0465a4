//! Clustering and ranking metrics, k-means and the label-combination split.

mod classification;
mod clustering;
mod kmeans;
mod report;
mod split;
mod stats;

pub use classification::{
    hit_rate_3, hit_rate_at, ndcg_3, ndcg_at, precision_f1, rank_labels, Averaging, NdcgScore, PrfScores,
};
pub use clustering::{ari, nmi, Partition};
pub use kmeans::{kmeans, KMeansResult};
pub use report::{table, MetricReport, METRIC_COLUMNS};
pub use split::{apportion, random_split, stratified_split, SplitIndices, DEFAULT_MIN_GROUP, DEFAULT_RATIOS};
pub use stats::{paired_t_test, PairedTTest};

pub const DEFAULT_RESTARTS: usize = 10;

use crate::error::Result;
use crate::labeling::LabelVector;
use crate::scalar::{norm, Scalar};

/// Note attached to clustering reports: the k-means protocol is our stand-in.
pub const KMEANS_NOTE: &str = "clustering: k-means++ on L2-normalized embeddings, best inertia over restarts";

/// Cluster L2-normalized embeddings with k-means and score the partition
/// against `truth`.
pub fn cluster_report<T: Scalar>(
    name: &str,
    embeddings: &[Vec<T>],
    truth: &Partition,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<MetricReport> {
    let floor = T::of(1e-12);
    let unit: Vec<Vec<T>> = embeddings
        .iter()
        .map(|e| {
            let inv = T::one() / norm(e).max(floor);
            e.iter().map(|&x| x * inv).collect()
        })
        .collect();
    let km = kmeans(&unit, k, restarts, seed)?;
    let mut report = MetricReport::new(name);
    report.ari = Some(ari(&km.partition, truth)?);
    report.nmi = Some(nmi(&km.partition, truth)?);
    report.n_clustered = embeddings.len();
    report
        .notes
        .push(format!("{KMEANS_NOTE}; k = {k}, restarts = {restarts}"));
    Ok(report)
}

/// Precision/recall/F1 of the decided label sets plus the ranking metrics of
/// the scores.
pub fn classification_report(
    name: &str,
    scores: &[Vec<f64>],
    decided: &[LabelVector],
    truth: &[LabelVector],
    averaging: Averaging,
) -> Result<MetricReport> {
    let prf = precision_f1(decided, truth, averaging)?;
    let ndcg = ndcg_3(scores, truth)?;
    let mut report = MetricReport::new(name);
    report.precision = Some(prf.precision);
    report.recall = Some(prf.recall);
    report.f1 = Some(prf.f1);
    report.hit_rate_3 = Some(hit_rate_3(scores, truth)?);
    report.ndcg_3 = Some(ndcg.value);
    report.n_samples = truth.len();
    report.ndcg_excluded = ndcg.excluded;
    Ok(report)
}
