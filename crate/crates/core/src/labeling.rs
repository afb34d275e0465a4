//! Weak-supervision intent labels from click behavior.
//!
//! Clicked URLs are routed to intents by regex rules (first match wins), or, for
//! corpora with informative document types, by the document type itself. A
//! query's click mass per intent gives its intent distribution, its perplexity
//! and its (multi-)label vector.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::clicklog::{ClickEvent, Session, SessionStep};
use crate::error::{Error, Result};

pub const FALLBACK_INTENT: &str = "all_others";
pub const DEFAULT_MULTI_LABEL_THRESHOLD: f64 = 0.2;

/// The health-search intent taxonomy, in label-vector order.
pub const HS_INTENTS: [&str; 14] = [
    "access_records",
    "account_mgmt",
    "appointment",
    "bill_cost_coverage",
    "communication",
    "drug_info",
    "health_wellness",
    "provider",
    "facility",
    "health_class",
    "health_plan",
    "job_search",
    "support",
    "all_others",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentTaxonomy {
    intents: Vec<String>,
}

impl IntentTaxonomy {
    pub fn new(intents: Vec<String>) -> Result<Self> {
        if intents.is_empty() {
            return Err(Error::Empty("intent taxonomy".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &intents {
            if !seen.insert(name) {
                return Err(Error::InvalidArgument(format!("duplicate intent `{name}`")));
            }
        }
        Ok(IntentTaxonomy { intents })
    }

    pub fn hs() -> Self {
        IntentTaxonomy {
            intents: HS_INTENTS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.intents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intents.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.intents
    }

    pub fn name(&self, index: usize) -> &str {
        &self.intents[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.intents.iter().position(|n| n == name)
    }

    pub fn fallback(&self) -> Option<usize> {
        self.index_of(FALLBACK_INTENT)
    }
}

/// Binary multi-label indicator over a taxonomy.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelVector(pub Vec<bool>);

impl LabelVector {
    pub fn empty(n: usize) -> Self {
        LabelVector(vec![false; n])
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Self {
        let mut v = vec![false; n];
        for &i in indices {
            v[i] = true;
        }
        LabelVector(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn has_any(&self) -> bool {
        self.0.iter().any(|&b| b)
    }

    pub fn active(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    pub fn jaccard(&self, other: &LabelVector) -> f64 {
        let inter = self.0.iter().zip(&other.0).filter(|(a, b)| **a && **b).count();
        let union = self.0.iter().zip(&other.0).filter(|(a, b)| **a || **b).count();
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn names(&self, taxonomy: &IntentTaxonomy) -> Vec<String> {
        self.active()
            .into_iter()
            .map(|i| taxonomy.name(i).to_string())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentRule {
    pub intent: String,
    pub pattern: String,
}

pub fn read_rules(path: &Path) -> Result<Vec<IntentRule>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

/// How a clicked document is mapped to an intent.
#[derive(Debug, Clone)]
pub enum IntentSource {
    /// Ordered URL rules; the first matching pattern wins.
    UrlRules(Vec<(usize, Regex)>),
    /// Document type names are intent names.
    DocType,
}

/// Routes clicks to intent indices of a taxonomy.
#[derive(Debug, Clone)]
pub struct Labeler {
    taxonomy: IntentTaxonomy,
    source: IntentSource,
}

impl Labeler {
    pub fn with_rules(taxonomy: IntentTaxonomy, rules: &[IntentRule]) -> Result<Self> {
        if rules.is_empty() {
            return Err(Error::Empty("intent rules".into()));
        }
        let compiled = rules
            .iter()
            .map(|r| {
                let idx = taxonomy
                    .index_of(&r.intent)
                    .ok_or_else(|| Error::InvalidArgument(format!("rule intent `{}` not in taxonomy", r.intent)))?;
                let re = Regex::new(&r.pattern).map_err(|source| Error::Regex {
                    intent: r.intent.clone(),
                    source,
                })?;
                Ok((idx, re))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Labeler {
            taxonomy,
            source: IntentSource::UrlRules(compiled),
        })
    }

    pub fn by_doc_type(taxonomy: IntentTaxonomy) -> Self {
        Labeler {
            taxonomy,
            source: IntentSource::DocType,
        }
    }

    pub fn taxonomy(&self) -> &IntentTaxonomy {
        &self.taxonomy
    }

    /// Intent of one clicked document; unmatched clicks go to `all_others` when the
    /// taxonomy has it and are unroutable otherwise.
    pub fn route(&self, doc_url: &str, doc_type: &str) -> Option<usize> {
        let hit = match &self.source {
            IntentSource::UrlRules(rules) => rules.iter().find(|(_, re)| re.is_match(doc_url)).map(|(i, _)| *i),
            IntentSource::DocType => self.taxonomy.index_of(doc_type),
        };
        hit.or_else(|| self.taxonomy.fallback())
    }

    fn mass(&self, clicks: &[ClickStat]) -> Vec<f64> {
        let mut mass = vec![0.0; self.taxonomy.len()];
        for c in clicks {
            if let Some(i) = self.route(&c.doc_url, &c.doc_type) {
                mass[i] += c.count as f64;
            }
        }
        mass
    }
}

/// Aggregated clicks of one query on one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClickStat {
    pub doc_url: String,
    pub doc_type: String,
    pub count: u64,
}

/// Per-query click statistics aggregated over a log, keyed by query.
pub fn click_stats(events: &[ClickEvent]) -> BTreeMap<String, Vec<ClickStat>> {
    let mut agg: BTreeMap<&str, BTreeMap<(&str, &str), u64>> = BTreeMap::new();
    for e in events {
        *agg.entry(&e.query)
            .or_default()
            .entry((&e.doc_url, &e.doc_type))
            .or_default() += u64::from(e.click_count);
    }
    agg.into_iter()
        .map(|(q, docs)| {
            let stats = docs
                .into_iter()
                .map(|((url, ty), count)| ClickStat {
                    doc_url: url.to_string(),
                    doc_type: ty.to_string(),
                    count,
                })
                .collect();
            (q.to_string(), stats)
        })
        .collect()
}

/// Intents holding at least `threshold` of the query's click mass. When none
/// does, the argmax intent (lowest taxonomy index on ties) is used alone.
pub fn label_query(clicks: &[ClickStat], labeler: &Labeler, threshold: f64) -> LabelVector {
    let n = labeler.taxonomy.len();
    let mass = labeler.mass(clicks);
    let total: f64 = mass.iter().sum();
    if total <= 0.0 {
        return LabelVector::empty(n);
    }
    let mut labels = LabelVector(mass.iter().map(|m| *m / total >= threshold).collect());
    if !labels.has_any() {
        let best = mass
            .iter()
            .enumerate()
            .fold(0, |best, (i, m)| if *m > mass[best] { i } else { best });
        labels.0[best] = true;
    }
    labels
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentDistribution {
    pub probs: Vec<f64>,
}

impl IntentDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("distribution sums to {total}, not 1")));
        }
        Ok(IntentDistribution { probs })
    }
}

pub fn intent_distribution(clicks: &[ClickStat], labeler: &Labeler) -> Result<IntentDistribution> {
    let mass = labeler.mass(clicks);
    let total: f64 = mass.iter().sum();
    if total < 1.0 {
        return Err(Error::Empty("query has no routable clicks".into()));
    }
    IntentDistribution::new(mass.into_iter().map(|m| m / total).collect())
}

/// `2^H` with `H = -sum p log2 p` and `0 log 0 = 0`.
///
/// Terms are summed in ascending order of probability so the result does not
/// depend on the order of the entries.
pub fn perplexity(dist: &IntentDistribution) -> Result<f64> {
    let dist = IntentDistribution::new(dist.probs.clone())?;
    let mut p: Vec<f64> = dist.probs.into_iter().filter(|&x| x > 0.0).collect();
    p.sort_by(f64::total_cmp);
    let entropy: f64 = -p.iter().map(|&x| x * x.log2()).sum::<f64>();
    Ok(entropy.exp2())
}

/// Intent implied by the document clicked at this step.
pub fn session_inferred_intent(step: &SessionStep, labeler: &Labeler) -> Option<LabelVector> {
    if step.doc_url.is_empty() && step.annotation.is_empty() {
        return None;
    }
    labeler
        .route(&step.doc_url, &step.annotation)
        .map(|i| LabelVector::from_indices(labeler.taxonomy.len(), &[i]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum IntentMatch {
    /// Label sets must be identical.
    #[default]
    Exact,
    /// Jaccard overlap of the label sets.
    Jaccard,
}

/// Fraction of session steps whose session-inferred intent agrees with the
/// query's global intent. Steps lacking either intent are left out.
pub fn concordance_rate(
    session: &Session,
    global_intents: &HashMap<String, LabelVector>,
    labeler: &Labeler,
    mode: IntentMatch,
) -> Result<f64> {
    let scores: Vec<f64> = session
        .steps
        .iter()
        .filter_map(|step| {
            let global = global_intents.get(&step.query)?;
            let local = session_inferred_intent(step, labeler)?;
            Some(match mode {
                IntentMatch::Exact => f64::from(u8::from(*global == local)),
                IntentMatch::Jaccard => global.jaccard(&local),
            })
        })
        .collect();
    if scores.is_empty() {
        return Err(Error::Empty(format!(
            "session `{}` has no comparable steps",
            session.session_id
        )));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Global label of one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryLabel {
    pub query: String,
    pub labels: LabelVector,
    pub perplexity: f64,
}

/// Label every query of a log; queries without routable clicks are skipped.
pub fn label_corpus(events: &[ClickEvent], labeler: &Labeler, threshold: f64) -> Vec<QueryLabel> {
    click_stats(events)
        .into_iter()
        .filter_map(|(query, stats)| {
            let labels = label_query(&stats, labeler, threshold);
            if !labels.has_any() {
                return None;
            }
            let ppl = intent_distribution(&stats, labeler).and_then(|d| perplexity(&d)).ok()?;
            Some(QueryLabel {
                query,
                labels,
                perplexity: ppl,
            })
        })
        .collect()
}

pub fn labels_to_tsv(labels: &[QueryLabel], taxonomy: &IntentTaxonomy) -> String {
    let mut out = String::from("query\tintents\tperplexity\n");
    for l in labels {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            l.query,
            l.labels.names(taxonomy).join(";"),
            l.perplexity
        );
    }
    out
}

pub fn labels_from_tsv(text: &str, taxonomy: &IntentTaxonomy) -> Result<Vec<QueryLabel>> {
    let mut lines = text.lines();
    if lines.next() != Some("query\tintents\tperplexity") {
        return Err(Error::Parse(
            "labels file lacks `query\\tintents\\tperplexity` header".into(),
        ));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("bad labels row `{line}`")));
            }
            let idx = f[1]
                .split(';')
                .filter(|s| !s.is_empty())
                .map(|name| {
                    taxonomy
                        .index_of(name)
                        .ok_or_else(|| Error::Parse(format!("unknown intent `{name}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            let perplexity = f[2]
                .parse()
                .map_err(|_| Error::Parse(format!("bad perplexity `{}`", f[2])))?;
            Ok(QueryLabel {
                query: f[0].to_string(),
                labels: LabelVector::from_indices(taxonomy.len(), &idx),
                perplexity,
            })
        })
        .collect()
}
