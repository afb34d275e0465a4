//! Wall-clock scaling of the multiset and pairwise losses.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{multiset_loss, pairwise_loss, pairwise_triples, EmbeddedSet, LossConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub loss: String,
    pub k: usize,
    pub n: usize,
    pub trials: usize,
    pub median_secs: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Shortest wall time of one trial; fast calls are repeated until they fill it
/// so timer resolution does not dominate small batches.
const MIN_TRIAL: Duration = Duration::from_millis(5);

fn time_trials(trials: usize, mut f: impl FnMut()) -> f64 {
    f();
    median(
        (0..trials)
            .map(|_| {
                let t = Instant::now();
                let mut calls = 0u32;
                while calls == 0 || t.elapsed() < MIN_TRIAL {
                    f();
                    calls += 1;
                }
                t.elapsed().as_secs_f64() / f64::from(calls)
            })
            .collect(),
    )
}

/// Median time of one loss-plus-gradient evaluation for every `(K, N)` pair,
/// with `N` queries in each of `K` sets of random `dim`-dimensional embeddings.
/// The pairwise loss is fed every co-click pair of the batch.
pub fn bench_complexity(ks: &[usize], ns: &[usize], trials: usize, dim: usize, seed: u64) -> Vec<BenchRow> {
    let cfg = LossConfig::default();
    let mut rows = Vec::new();
    for &k in ks {
        for &n in ns {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((k as u64) << 32) ^ n as u64);
            let sets: Vec<EmbeddedSet<f64>> = (0..k)
                .map(|_| {
                    EmbeddedSet::uniform(
                        (0..n)
                            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                            .collect(),
                    )
                })
                .collect();
            let flat: Vec<Vec<f64>> = sets.iter().flat_map(|s| s.embeddings.iter().cloned()).collect();
            let groups: Vec<usize> = (0..k).flat_map(|i| std::iter::repeat_n(i, n)).collect();
            let triples = pairwise_triples(&groups, &mut rng);

            let multiset = time_trials(trials, || {
                std::hint::black_box(multiset_loss(&sets, &cfg).expect("valid batch"));
            });
            let pairwise = time_trials(trials, || {
                std::hint::black_box(pairwise_loss(&flat, &triples, cfg.norm_floor).expect("valid batch"));
            });
            for (loss, secs) in [("multiset", multiset), ("pairwise", pairwise)] {
                rows.push(BenchRow {
                    loss: loss.to_string(),
                    k,
                    n,
                    trials,
                    median_secs: secs,
                });
            }
        }
    }
    rows
}

pub fn bench_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("loss,k,n,trials,median_secs\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{:.9}", r.loss, r.k, r.n, r.trials, r.median_secs);
    }
    out
}
