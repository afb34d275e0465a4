//! Co-query set extraction: queries grouped by the document type (or URL
//! pattern) they click, with click-share weights.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clicklog::{url_path, ClickEvent};
use crate::error::{Error, Result};

/// HS-style threshold: click count greater than 2.
pub const HS_MIN_CLICKS: u64 = 3;
/// TripClick-style threshold: click count greater than 5.
pub const TRIPCLICK_MIN_CLICKS: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GroupKey {
    #[default]
    DocType,
    /// First path segment of the clicked URL.
    UrlPattern,
}

impl GroupKey {
    pub fn key_of<'a>(&self, event: &'a ClickEvent) -> &'a str {
        match self {
            GroupKey::DocType => &event.doc_type,
            GroupKey::UrlPattern => url_pattern(&event.doc_url),
        }
    }
}

impl FromStr for GroupKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "doc_type" | "doc-type" => Ok(GroupKey::DocType),
            "url_pattern" | "url-pattern" => Ok(GroupKey::UrlPattern),
            other => Err(Error::InvalidArgument(format!("unknown grouping key `{other}`"))),
        }
    }
}

/// `/provider/find/x` -> `provider`; the root path maps to `/`.
pub fn url_pattern(url: &str) -> &str {
    url_path(url).split('/').find(|s| !s.is_empty()).unwrap_or("/")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetMember {
    pub query: String,
    pub count: u64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentSet {
    pub set_id: String,
    pub members: Vec<SetMember>,
}

impl DocumentSet {
    pub fn n_members(&self) -> usize {
        self.members.len()
    }
}

/// Turn raw click counts into a weighted set: `w_j = count_j / sum(count)`.
pub fn compute_weights(set_id: impl Into<String>, counts: Vec<(String, u64)>) -> Result<DocumentSet> {
    let set_id = set_id.into();
    if counts.is_empty() {
        return Err(Error::Empty(format!("document set `{set_id}` has no members")));
    }
    if let Some((q, _)) = counts.iter().find(|(_, c)| *c == 0) {
        return Err(Error::InvalidArgument(format!(
            "query `{q}` has zero clicks in `{set_id}`"
        )));
    }
    let total: u64 = counts.iter().map(|(_, c)| c).sum();
    let members = counts
        .into_iter()
        .map(|(query, count)| SetMember {
            query,
            count,
            weight: count as f64 / total as f64,
        })
        .collect();
    Ok(DocumentSet { set_id, members })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoQueryCorpus {
    pub sets: Vec<DocumentSet>,
    /// query -> `(set_id, weight)` for every set the query belongs to.
    pub query_index: BTreeMap<String, Vec<(String, f64)>>,
}

impl CoQueryCorpus {
    pub fn from_sets(sets: Vec<DocumentSet>) -> Self {
        let mut query_index: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        for set in &sets {
            for m in &set.members {
                query_index
                    .entry(m.query.clone())
                    .or_default()
                    .push((set.set_id.clone(), m.weight));
            }
        }
        CoQueryCorpus { sets, query_index }
    }

    /// Number of document sets (K).
    pub fn k(&self) -> usize {
        self.sets.len()
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.query_index.keys().map(String::as_str)
    }

    /// Set id with the largest weight for `query`; ties go to the first set.
    pub fn dominant_set(&self, query: &str) -> Option<&str> {
        self.query_index.get(query).and_then(|v| {
            v.iter()
                .fold(None::<&(String, f64)>, |best, cur| match best {
                    Some(b) if b.1 >= cur.1 => Some(b),
                    _ => Some(cur),
                })
                .map(|(s, _)| s.as_str())
        })
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for set in &self.sets {
            serde_json::to_writer(&mut out, set).map_err(|e| Error::json("document set", e))?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let sets = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| Error::json(path.display().to_string(), e)))
            .collect::<Result<Vec<DocumentSet>>>()?;
        Ok(CoQueryCorpus::from_sets(sets))
    }
}

/// Group queries by clicked key, keeping `(query, set)` pairs whose aggregated
/// click count is at least `min_clicks`.
pub fn extract_sets(events: &[ClickEvent], min_clicks: u64, key: GroupKey) -> CoQueryCorpus {
    assert!(min_clicks >= 1, "min_clicks must be at least 1");
    let mut counts: BTreeMap<&str, BTreeMap<&str, u64>> = BTreeMap::new();
    for e in events {
        *counts
            .entry(key.key_of(e))
            .or_default()
            .entry(e.query.as_str())
            .or_default() += u64::from(e.click_count);
    }
    let sets = counts
        .into_iter()
        .filter_map(|(set_id, members)| {
            let kept: Vec<(String, u64)> = members
                .into_iter()
                .filter(|(_, c)| *c >= min_clicks)
                .map(|(q, c)| (q.to_string(), c))
                .collect();
            (!kept.is_empty()).then(|| compute_weights(set_id, kept).expect("non-empty, positive counts"))
        })
        .collect();
    CoQueryCorpus::from_sets(sets)
}

/// Queries drawn from one document set for a training step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSet {
    pub set_id: String,
    pub queries: Vec<String>,
    /// Member weights renormalized over the sampled queries.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub sets: Vec<BatchSet>,
}

impl Batch {
    pub fn n_queries(&self) -> usize {
        self.sets.iter().map(|s| s.queries.len()).sum()
    }
}

/// How members are drawn from a set that has more than `queries_per_set` of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MemberSampling {
    /// Without replacement, proportional to click weight.
    #[default]
    Weighted,
    /// Without replacement, every member equally likely.
    Uniform,
}

/// Sample `sets_per_batch` distinct sets with at least two members, then up to
/// `queries_per_set` members of each without replacement, proportional to weight.
pub fn batch_sample(corpus: &CoQueryCorpus, sets_per_batch: usize, queries_per_set: usize, seed: u64) -> Result<Batch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    batch_sample_with(
        corpus,
        sets_per_batch,
        queries_per_set,
        MemberSampling::Weighted,
        &mut rng,
    )
}

pub fn batch_sample_with<R: Rng + ?Sized>(
    corpus: &CoQueryCorpus,
    sets_per_batch: usize,
    queries_per_set: usize,
    sampling: MemberSampling,
    rng: &mut R,
) -> Result<Batch> {
    if sets_per_batch < 2 {
        return Err(Error::InvalidArgument("a batch needs at least two sets".into()));
    }
    if queries_per_set < 2 {
        return Err(Error::InvalidArgument(
            "a batch needs at least two queries per set".into(),
        ));
    }
    let eligible: Vec<&DocumentSet> = corpus.sets.iter().filter(|s| s.n_members() >= 2).collect();
    if eligible.len() < sets_per_batch {
        return Err(Error::InvalidArgument(format!(
            "only {} sets have two or more members, batch needs {sets_per_batch}",
            eligible.len()
        )));
    }
    let mut chosen: Vec<usize> = (0..eligible.len()).choose_multiple(rng, sets_per_batch);
    chosen.sort_unstable();

    let mut sets = Vec::with_capacity(sets_per_batch);
    for idx in chosen {
        let set = eligible[idx];
        let mut picked: Vec<usize> = if set.n_members() <= queries_per_set {
            (0..set.n_members()).collect()
        } else {
            let all: Vec<usize> = (0..set.n_members()).collect();
            match sampling {
                MemberSampling::Weighted => all
                    .choose_multiple_weighted(rng, queries_per_set, |&i| set.members[i].weight)
                    .expect("weights are positive and finite")
                    .copied()
                    .collect(),
                MemberSampling::Uniform => all.choose_multiple(rng, queries_per_set).copied().collect(),
            }
        };
        picked.sort_unstable();
        let total: f64 = picked.iter().map(|&i| set.members[i].weight).sum();
        sets.push(BatchSet {
            set_id: set.set_id.clone(),
            queries: picked.iter().map(|&i| set.members[i].query.clone()).collect(),
            weights: picked.iter().map(|&i| set.members[i].weight / total).collect(),
        });
    }
    Ok(Batch { sets })
}
