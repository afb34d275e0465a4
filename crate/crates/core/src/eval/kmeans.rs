use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Partition;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult<T> {
    pub partition: Partition,
    pub centers: Vec<Vec<T>>,
    pub inertia: T,
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

fn nearest<T: Scalar>(point: &[T], centers: &[Vec<T>]) -> (usize, T) {
    centers
        .iter()
        .enumerate()
        .map(|(i, c)| (i, sq_dist(point, c)))
        .fold((0, T::infinity()), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn plus_plus_init<T: Scalar, R: Rng>(points: &[Vec<T>], k: usize, rng: &mut R) -> Vec<Vec<T>> {
    let mut centers = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<T> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().map(|d| d.as_f64()).sum();
        let next = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            d2.iter()
                .position(|d| {
                    target -= d.as_f64();
                    target < 0.0
                })
                .unwrap_or(points.len() - 1)
        } else {
            rng.gen_range(0..points.len())
        };
        centers.push(points[next].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centers[centers.len() - 1]));
        }
    }
    centers
}

fn lloyd<T: Scalar>(points: &[Vec<T>], mut centers: Vec<Vec<T>>) -> (Vec<usize>, Vec<Vec<T>>, T) {
    let (k, dim) = (centers.len(), points[0].len());
    let mut assign = vec![usize::MAX; points.len()];
    for _ in 0..MAX_ITERS {
        let mut changed = false;
        for (a, p) in assign.iter_mut().zip(points) {
            let (best, _) = nearest(p, &centers);
            if *a != best {
                *a = best;
                changed = true;
            }
        }
        let mut sums = vec![vec![T::zero(); dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assign.iter().zip(points) {
            counts[a] += 1;
            for (s, &x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // reseed an empty cluster with the point farthest from its center
                let far = (0..points.len())
                    .max_by(|&i, &j| {
                        sq_dist(&points[i], &centers[assign[i]])
                            .partial_cmp(&sq_dist(&points[j], &centers[assign[j]]))
                            .unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .expect("non-empty input");
                centers[c] = points[far].clone();
                assign[far] = c;
                changed = true;
            } else {
                let inv = T::one() / T::of_usize(counts[c]);
                centers[c] = sums[c].iter().map(|&s| s * inv).collect();
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = assign
        .iter()
        .zip(points)
        .fold(T::zero(), |acc, (&a, p)| acc + sq_dist(p, &centers[a]));
    (assign, centers, inertia)
}

/// Best-inertia Lloyd run over `restarts` k-means++ initializations.
pub fn kmeans<T: Scalar>(points: &[Vec<T>], k: usize, restarts: usize, seed: u64) -> Result<KMeansResult<T>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if k > points.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds {} items",
            points.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, Vec<Vec<T>>, T)> = None;
    for _ in 0..restarts.max(1) {
        let init = plus_plus_init(points, k, &mut rng);
        let run = lloyd(points, init);
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (assign, centers, inertia) = best.expect("at least one restart");
    Ok(KMeansResult {
        partition: Partition::from_labels(assign),
        centers,
        inertia,
    })
}
