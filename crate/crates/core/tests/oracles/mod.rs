//! Brute-force reference implementations. Each one follows the textbook
//! definition with plain loops over f64 and shares no code with the library.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::Rng;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
}

pub fn mean(vs: &[Vec<f64>]) -> Vec<f64> {
    let mut c = vec![0.0; vs[0].len()];
    for v in vs {
        for i in 0..c.len() {
            c[i] += v[i] / vs.len() as f64;
        }
    }
    c
}

/// One document set: member embeddings and click weights.
#[derive(Debug, Clone)]
pub struct Set {
    pub emb: Vec<Vec<f64>>,
    pub w: Vec<f64>,
}

pub struct MultisetParts {
    pub intra: f64,
    pub inter: f64,
    pub multiset: f64,
}

fn term(c: f64, eps: f64, clamp: f64) -> f64 {
    let c = if c > clamp { clamp } else { c };
    1.0 / (1.0 - c.exp() / std::f64::consts::E + eps)
}

/// Intra, inter and multiset values by direct summation. With `loo`, the
/// intra centroid of a query is the mean of the other members of its set.
pub fn multiset(sets: &[Set], eps: f64, clamp: f64, loo: bool) -> MultisetParts {
    let k = sets.len();
    let centroids: Vec<Vec<f64>> = sets.iter().map(|s| mean(&s.emb)).collect();
    let mut intra = 0.0;
    for i in 0..k {
        let n = sets[i].emb.len();
        for j in 0..n {
            let c_i = if loo {
                let others: Vec<Vec<f64>> = (0..n).filter(|&m| m != j).map(|m| sets[i].emb[m].clone()).collect();
                mean(&others)
            } else {
                centroids[i].clone()
            };
            intra += sets[i].w[j] / n as f64 * term(cos(&sets[i].emb[j], &c_i), eps, clamp);
        }
    }
    let mut inter = 0.0;
    for i in 0..k {
        let n = sets[i].emb.len();
        for j in 0..k {
            if j == i {
                continue;
            }
            for m in 0..n {
                inter += sets[i].w[m] / n as f64 * term(cos(&sets[i].emb[m], &centroids[j]), eps, clamp);
            }
        }
    }
    MultisetParts {
        intra,
        inter,
        multiset: -(intra / inter).ln(),
    }
}

/// `sum [1/(1+e^cos(a,p)) - 1/(1+e^cos(a,n))]`.
pub fn pairwise(emb: &[Vec<f64>], triples: &[(usize, usize, usize)]) -> f64 {
    let mut total = 0.0;
    for &(a, p, n) in triples {
        total += 1.0 / (1.0 + cos(&emb[a], &emb[p]).exp()) - 1.0 / (1.0 + cos(&emb[a], &emb[n]).exp());
    }
    total
}

/// Mean binary cross-entropy with natural logs.
pub fn bce(y: &[f64], p: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..y.len() {
        total -= y[i] * p[i].ln() + (1.0 - y[i]) * (1.0 - p[i]).ln();
    }
    total / y.len() as f64
}

/// Adjusted Rand index from explicit pair counts (Hubert and Arabie form).
pub fn ari(x: &[usize], y: &[usize]) -> f64 {
    let (mut ss, mut sd, mut ds, mut dd) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            match (x[i] == x[j], y[i] == y[j]) {
                (true, true) => ss += 1.0,
                (true, false) => sd += 1.0,
                (false, true) => ds += 1.0,
                (false, false) => dd += 1.0,
            }
        }
    }
    let den = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd);
    if den == 0.0 {
        return 1.0;
    }
    2.0 * (ss * dd - sd * ds) / den
}

fn distinct(v: &[usize]) -> Vec<usize> {
    let mut d = v.to_vec();
    d.sort_unstable();
    d.dedup();
    d
}

fn entropy(v: &[usize]) -> f64 {
    let n = v.len() as f64;
    let mut h = 0.0;
    for a in distinct(v) {
        let p = v.iter().filter(|&&x| x == a).count() as f64 / n;
        h -= p * p.ln();
    }
    h
}

/// Same grouping up to renaming of cluster ids.
pub fn same_grouping(x: &[usize], y: &[usize]) -> bool {
    (0..x.len()).all(|i| (0..x.len()).all(|j| (x[i] == x[j]) == (y[i] == y[j])))
}

/// Mutual information over the arithmetic mean of the entropies. A
/// zero-entropy side gives 1 for identical groupings and 0 otherwise.
pub fn nmi(x: &[usize], y: &[usize]) -> f64 {
    if x.is_empty() {
        return 1.0;
    }
    let (hx, hy) = (entropy(x), entropy(y));
    if hx == 0.0 || hy == 0.0 {
        return if same_grouping(x, y) { 1.0 } else { 0.0 };
    }
    let n = x.len() as f64;
    let mut mi = 0.0;
    for a in distinct(x) {
        for b in distinct(y) {
            let joint = (0..x.len()).filter(|&i| x[i] == a && y[i] == b).count() as f64 / n;
            if joint == 0.0 {
                continue;
            }
            let pa = x.iter().filter(|&&v| v == a).count() as f64 / n;
            let pb = y.iter().filter(|&&v| v == b).count() as f64 / n;
            mi += joint * (joint / (pa * pb)).ln();
        }
    }
    mi / (0.5 * (hx + hy))
}

/// 0-based rank of label `i`: labels with a higher score, or an equal score
/// and a lower index, come first.
pub fn rank_of(scores: &[f64], i: usize) -> usize {
    (0..scores.len())
        .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i))
        .count()
}

pub fn hit_rate_at(scores: &[Vec<f64>], truth: &[Vec<bool>], k: usize) -> f64 {
    let mut hits = 0.0;
    for (s, t) in scores.iter().zip(truth) {
        if (0..s.len()).any(|i| t[i] && rank_of(s, i) < k) {
            hits += 1.0;
        }
    }
    hits / scores.len() as f64
}

/// Mean NDCG@k over samples with at least one relevant label, and the
/// number of samples left out.
pub fn ndcg_at(scores: &[Vec<f64>], truth: &[Vec<bool>], k: usize) -> (f64, usize) {
    let mut total = 0.0;
    let mut counted = 0;
    for (s, t) in scores.iter().zip(truth) {
        let relevant = t.iter().filter(|&&b| b).count();
        if relevant == 0 {
            continue;
        }
        let mut dcg = 0.0;
        for i in 0..s.len() {
            let r = rank_of(s, i);
            if t[i] && r < k {
                dcg += 1.0 / ((r + 2) as f64).log2();
            }
        }
        let mut idcg = 0.0;
        for r in 0..relevant.min(k) {
            idcg += 1.0 / ((r + 2) as f64).log2();
        }
        total += dcg / idcg;
        counted += 1;
    }
    let value = if counted == 0 { 0.0 } else { total / counted as f64 };
    (value, scores.len() - counted)
}

/// `2^H` with base-2 entropy.
pub fn perplexity(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &x in p {
        if x > 0.0 {
            h -= x * x.log2();
        }
    }
    2f64.powf(h)
}

/// Central differences of `f` at `x`.
pub fn central_diff(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut x = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let up = f(&x);
        x[i] = orig - h;
        let down = f(&x);
        x[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    g
}

/// `|a - b| / max(|a|, |b|, floor)` in the Euclidean norm.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    diff / na.max(nb).max(floor)
}

pub fn gaussian_vec<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    // Box-Muller keeps the oracle free of extra crates
    (0..d)
        .map(|_| {
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect()
}

/// Random sets with `sizes[i]` members of dimension `d` and positive weights
/// normalized per set.
pub fn random_sets<R: Rng>(rng: &mut R, sizes: &[usize], d: usize) -> Vec<Set> {
    sizes
        .iter()
        .map(|&n| {
            let emb = (0..n).map(|_| gaussian_vec(rng, d)).collect();
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            Set {
                emb,
                w: raw.iter().map(|x| x / total).collect(),
            }
        })
        .collect()
}

/// Flatten set embeddings into one parameter vector.
pub fn flatten(sets: &[Set]) -> Vec<f64> {
    sets.iter().flat_map(|s| s.emb.iter().flatten().copied()).collect()
}

/// Inverse of [`flatten`], keeping the weights of `like`.
pub fn unflatten(x: &[f64], like: &[Set]) -> Vec<Set> {
    let mut it = x.iter().copied();
    like.iter()
        .map(|s| Set {
            emb: s
                .emb
                .iter()
                .map(|e| (0..e.len()).map(|_| it.next().unwrap()).collect())
                .collect(),
            w: s.w.clone(),
        })
        .collect()
}
