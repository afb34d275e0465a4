//! Library-versus-oracle comparisons shared by the integration tests and the
//! acceptance binary. Each returns the worst error seen so callers pick the
//! tolerance.
#![allow(dead_code)]

use clickrep::eval::{ari, hit_rate_at, ndcg_at, nmi, Partition};
use clickrep::labeling::{perplexity, IntentDistribution, LabelVector};
use clickrep::losses::{
    bce_loss, bce_with_logits, inter_loss, intra_loss, multiset_loss, pairwise_loss, EmbeddedSet, LossConfig, Triple,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracles::{self, Set};

pub const FD_STEP: f64 = 1e-5;

pub fn to_lib(sets: &[Set]) -> Vec<EmbeddedSet<f64>> {
    sets.iter()
        .map(|s| EmbeddedSet::new(s.emb.clone(), s.w.clone()))
        .collect()
}

fn flat_grad(g: &[Vec<Vec<f64>>]) -> Vec<f64> {
    g.iter().flatten().flatten().copied().collect()
}

/// Worst relative gradient error over `instances` random draws, per loss.
pub fn gradient_errors(seed: u64, instances: usize) -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = vec![
        ("pairwise", 0.0f64),
        ("intra", 0.0),
        ("inter", 0.0),
        ("multiset", 0.0),
        ("multiset leave-one-out", 0.0),
        ("bce", 0.0),
        ("bce with logits", 0.0),
    ];
    let plain = LossConfig::default();
    let loo = LossConfig {
        leave_one_out: true,
        ..plain
    };
    for _ in 0..instances {
        let d = rng.gen_range(2..=8);
        let k = rng.gen_range(2..=4);
        let sizes: Vec<usize> = (0..k).map(|_| rng.gen_range(2..=5)).collect();
        let sets = oracles::random_sets(&mut rng, &sizes, d);
        let x = oracles::flatten(&sets);

        type SetLoss = fn(
            &[EmbeddedSet<f64>],
            &LossConfig,
        ) -> clickrep::Result<clickrep::losses::LossGrad<f64, Vec<Vec<Vec<f64>>>>>;
        let cases: [(usize, SetLoss, &LossConfig); 4] = [
            (1, intra_loss, &plain),
            (2, inter_loss, &plain),
            (3, multiset_loss, &plain),
            (4, multiset_loss, &loo),
        ];
        for (slot, loss, cfg) in cases {
            let analytic = flat_grad(&loss(&to_lib(&sets), cfg).unwrap().grad);
            let numeric = oracles::central_diff(
                |p| {
                    let s = oracles::unflatten(p, &sets);
                    let parts = oracles::multiset(&s, cfg.epsilon, cfg.cosine_clamp, cfg.leave_one_out);
                    match slot {
                        1 => parts.intra,
                        2 => parts.inter,
                        _ => parts.multiset,
                    }
                },
                &x,
                FD_STEP,
            );
            worst[slot].1 = worst[slot].1.max(oracles::rel_err(&analytic, &numeric, 1e-8));
        }

        // pairwise over the flattened members with random triples
        let emb: Vec<Vec<f64>> = sets.iter().flat_map(|s| s.emb.clone()).collect();
        let n = emb.len();
        let triples: Vec<(usize, usize, usize)> = (0..rng.gen_range(1..=6))
            .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n)))
            .collect();
        let lib_triples: Vec<Triple> = triples
            .iter()
            .map(|&(a, p, n)| Triple {
                anchor: a,
                positive: p,
                negative: n,
            })
            .collect();
        let analytic: Vec<f64> = pairwise_loss(&emb, &lib_triples, 1e-12).unwrap().grad.concat();
        let numeric = oracles::central_diff(
            |p| {
                let e: Vec<Vec<f64>> = p.chunks(d).map(<[f64]>::to_vec).collect();
                oracles::pairwise(&e, &triples)
            },
            &emb.concat(),
            FD_STEP,
        );
        worst[0].1 = worst[0].1.max(oracles::rel_err(&analytic, &numeric, 1e-8));

        let labels = rng.gen_range(1..=8);
        let y: Vec<f64> = (0..labels).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect();
        let p: Vec<f64> = (0..labels).map(|_| rng.gen_range(0.05..0.95)).collect();
        let analytic = bce_loss(&y, &p).unwrap().grad;
        let numeric = oracles::central_diff(|q| oracles::bce(&y, q), &p, FD_STEP);
        worst[5].1 = worst[5].1.max(oracles::rel_err(&analytic, &numeric, 1e-8));

        let z: Vec<f64> = (0..labels).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let analytic = bce_with_logits(&y, &z).unwrap().grad;
        let numeric = oracles::central_diff(
            |q| {
                let probs: Vec<f64> = q.iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect();
                oracles::bce(&y, &probs)
            },
            &z,
            FD_STEP,
        );
        worst[6].1 = worst[6].1.max(oracles::rel_err(&analytic, &numeric, 1e-8));
    }
    worst
}

/// Every size tuple with `K` in 2..=4 sets of 2..=5 members.
pub fn all_shapes() -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for k in 2..=4u32 {
        for code in 0..4usize.pow(k) {
            out.push((0..k).map(|i| code / 4usize.pow(i) % 4 + 2).collect());
        }
    }
    out
}

/// `|a - b| / max(1, |b|)`: absolute for O(1) values, relative once a
/// near-collinear member drives the intra term into the hundreds.
pub fn scaled_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Worst [`scaled_gap`] of intra, inter and multiset against the looped
/// oracle, with and without leave-one-out, one draw per shape.
pub fn multiset_oracle_error(seed: u64) -> (usize, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes = all_shapes();
    let mut worst = 0.0f64;
    for sizes in &shapes {
        let d = rng.gen_range(2..=8);
        let sets = oracles::random_sets(&mut rng, sizes, d);
        for loo in [false, true] {
            let cfg = LossConfig {
                leave_one_out: loo,
                ..LossConfig::default()
            };
            let lib = to_lib(&sets);
            let o = oracles::multiset(&sets, cfg.epsilon, cfg.cosine_clamp, loo);
            worst = worst
                .max(scaled_gap(intra_loss(&lib, &cfg).unwrap().value, o.intra))
                .max(scaled_gap(inter_loss(&lib, &cfg).unwrap().value, o.inter))
                .max(scaled_gap(multiset_loss(&lib, &cfg).unwrap().value, o.multiset));
        }
    }
    (shapes.len(), worst)
}

pub fn random_partition<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let k = rng.gen_range(1..=n.min(6));
    (0..n).map(|_| rng.gen_range(0..k)).collect()
}

/// Scores on a coarse grid so ties are common; truth may be empty.
pub fn random_ranking<R: Rng>(rng: &mut R, samples: usize, labels: usize) -> (Vec<Vec<f64>>, Vec<Vec<bool>>) {
    let scores = (0..samples)
        .map(|_| (0..labels).map(|_| f64::from(rng.gen_range(0..5u8)) / 4.0).collect())
        .collect();
    let truth = (0..samples)
        .map(|_| (0..labels).map(|_| rng.gen_bool(0.3)).collect())
        .collect();
    (scores, truth)
}

pub fn random_distribution<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.2) {
                0.0
            } else {
                rng.gen_range(0.0..1.0)
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        let mut p = vec![0.0; n];
        p[0] = 1.0;
        return p;
    }
    raw.iter().map(|x| x / total).collect()
}

pub fn lib_ari(x: &[usize], y: &[usize]) -> f64 {
    ari(
        &Partition::from_labels(x.iter().copied()),
        &Partition::from_labels(y.iter().copied()),
    )
    .unwrap()
}

pub fn lib_nmi(x: &[usize], y: &[usize]) -> f64 {
    nmi(
        &Partition::from_labels(x.iter().copied()),
        &Partition::from_labels(y.iter().copied()),
    )
    .unwrap()
}

pub fn label_vectors(truth: &[Vec<bool>]) -> Vec<LabelVector> {
    truth.iter().map(|t| LabelVector(t.clone())).collect()
}

pub fn lib_perplexity(p: &[f64]) -> f64 {
    perplexity(&IntentDistribution::new(p.to_vec()).unwrap()).unwrap()
}

/// Worst absolute error per metric over `trials` instances of at most 20 items.
pub fn metric_oracle_errors(seed: u64, trials: usize) -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 5];
    for _ in 0..trials {
        let n = rng.gen_range(1..=20);
        let (x, y) = (random_partition(&mut rng, n), random_partition(&mut rng, n));
        worst[0] = worst[0].max((lib_ari(&x, &y) - oracles::ari(&x, &y)).abs());
        worst[1] = worst[1].max((lib_nmi(&x, &y) - oracles::nmi(&x, &y)).abs());

        let labels = rng.gen_range(1..=8);
        let (scores, truth) = random_ranking(&mut rng, n, labels);
        let lv = label_vectors(&truth);
        let ndcg = ndcg_at(&scores, &lv, 3).unwrap();
        let (o_ndcg, o_excluded) = oracles::ndcg_at(&scores, &truth, 3);
        let excluded_gap = if ndcg.excluded == o_excluded { 0.0 } else { 1.0 };
        worst[2] = worst[2].max((ndcg.value - o_ndcg).abs()).max(excluded_gap);
        worst[3] =
            worst[3].max((hit_rate_at(&scores, &lv, 3).unwrap() - oracles::hit_rate_at(&scores, &truth, 3)).abs());

        let p = random_distribution(&mut rng, n);
        worst[4] = worst[4].max((lib_perplexity(&p) - oracles::perplexity(&p)).abs());
    }
    ["ARI", "NMI", "NDCG@3", "HitRate@3", "perplexity"]
        .into_iter()
        .zip(worst)
        .collect()
}

/// Worst [`scaled_gap`] of each loss when every embedding is scaled by
/// `factor`, plus the largest raw absolute change seen.
pub fn scale_invariance_errors(seed: u64, instances: usize, factor: f64) -> (Vec<(&'static str, f64)>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 5];
    let mut worst_abs = 0.0f64;
    let plain = LossConfig::default();
    let loo = LossConfig {
        leave_one_out: true,
        ..plain
    };
    let scale = |sets: &[EmbeddedSet<f64>]| -> Vec<EmbeddedSet<f64>> {
        sets.iter()
            .map(|s| {
                EmbeddedSet::new(
                    s.embeddings
                        .iter()
                        .map(|e| e.iter().map(|v| v * factor).collect())
                        .collect(),
                    s.weights.clone(),
                )
            })
            .collect()
    };
    for _ in 0..instances {
        let d = rng.gen_range(2..=8);
        let sizes: Vec<usize> = (0..rng.gen_range(2..=4)).map(|_| rng.gen_range(2..=5)).collect();
        let sets = to_lib(&oracles::random_sets(&mut rng, &sizes, d));
        let big = scale(&sets);
        let mut diff = |f: &dyn Fn(&[EmbeddedSet<f64>]) -> f64| {
            let (a, b) = (f(&sets), f(&big));
            worst_abs = worst_abs.max((a - b).abs());
            scaled_gap(b, a)
        };
        worst[0] = worst[0].max(diff(&|s| intra_loss(s, &plain).unwrap().value));
        worst[1] = worst[1].max(diff(&|s| inter_loss(s, &plain).unwrap().value));
        worst[2] = worst[2].max(diff(&|s| multiset_loss(s, &plain).unwrap().value));
        worst[3] = worst[3].max(diff(&|s| multiset_loss(s, &loo).unwrap().value));

        let flat = |s: &[EmbeddedSet<f64>]| -> Vec<Vec<f64>> { s.iter().flat_map(|x| x.embeddings.clone()).collect() };
        let (e, eb) = (flat(&sets), flat(&big));
        let n = e.len();
        let triples: Vec<Triple> = (0..8)
            .map(|_| Triple {
                anchor: rng.gen_range(0..n),
                positive: rng.gen_range(0..n),
                negative: rng.gen_range(0..n),
            })
            .collect();
        let a = pairwise_loss(&e, &triples, 1e-12).unwrap().value;
        let b = pairwise_loss(&eb, &triples, 1e-12).unwrap().value;
        worst[4] = worst[4].max(scaled_gap(b, a));
        worst_abs = worst_abs.max((a - b).abs());
    }
    let named = ["intra", "inter", "multiset", "multiset leave-one-out", "pairwise"]
        .into_iter()
        .zip(worst)
        .collect();
    (named, worst_abs)
}
