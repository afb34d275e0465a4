use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::LabelVector;

pub const DEFAULT_RATIOS: [f64; 3] = [0.6, 0.2, 0.2];
pub const DEFAULT_MIN_GROUP: usize = 3;

/// Indices into the input, per split.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn sizes(&self) -> [usize; 3] {
        [self.train.len(), self.val.len(), self.test.len()]
    }
}

/// Largest-remainder apportionment of `n` items over `ratios`; ties in the
/// remainder go to the earlier split.
pub fn apportion(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let quotas = ratios.map(|r| r * n as f64);
    let mut counts = quotas.map(|q| q.floor() as usize);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let short = n - counts.iter().sum::<usize>();
    for &s in order.iter().take(short) {
        counts[s] += 1;
    }
    counts
}

/// Group items by exact label combination and split each group by `ratios`.
/// Groups smaller than `min_group` go entirely to test.
pub fn stratified_split(labels: &[LabelVector], ratios: [f64; 3], min_group: usize, seed: u64) -> Result<SplitIndices> {
    if labels.is_empty() {
        return Err(Error::Empty("nothing to split".into()));
    }
    if ratios.iter().any(|&r| r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios {ratios:?} must be non-negative and sum to 1"
        )));
    }
    let mut groups: BTreeMap<&LabelVector, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SplitIndices::default();
    for (_, mut members) in groups {
        if members.len() < min_group {
            out.test.extend(members);
            continue;
        }
        members.shuffle(&mut rng);
        let [a, b, _] = apportion(members.len(), &ratios);
        out.train.extend_from_slice(&members[..a]);
        out.val.extend_from_slice(&members[a..a + b]);
        out.test.extend_from_slice(&members[a + b..]);
    }
    for part in [&mut out.train, &mut out.val, &mut out.test] {
        part.sort_unstable();
    }
    Ok(out)
}

/// Shuffle `0..n` and cut it by `ratios` (largest remainder).
pub fn random_split(n: usize, ratios: [f64; 3], seed: u64) -> Result<SplitIndices> {
    if n == 0 {
        return Err(Error::Empty("nothing to split".into()));
    }
    if ratios.iter().any(|&r| r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios {ratios:?} must be non-negative and sum to 1"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let [a, b, _] = apportion(n, &ratios);
    let mut out = SplitIndices {
        train: order[..a].to_vec(),
        val: order[a..a + b].to_vec(),
        test: order[a + b..].to_vec(),
    };
    for part in [&mut out.train, &mut out.val, &mut out.test] {
        part.sort_unstable();
    }
    Ok(out)
}
