//! Central finite differences, the reference for every hand-written gradient.

use crate::scalar::{norm, Scalar};

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate `i`.
pub fn finite_diff_grad<T, F>(mut loss_fn: F, params: &[T], h: T) -> Vec<T>
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    assert!(h > T::zero(), "step must be positive");
    let mut x = params.to_vec();
    let two_h = h + h;
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + h;
            let up = loss_fn(&x);
            x[i] = orig - h;
            let down = loss_fn(&x);
            x[i] = orig;
            (up - down) / two_h
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|)`, with both norms below `floor` counting as agreement.
pub fn relative_error<T: Scalar>(analytic: &[T], numeric: &[T], floor: T) -> T {
    let diff: Vec<T> = analytic.iter().zip(numeric).map(|(&a, &b)| a - b).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale < floor {
        return T::zero();
    }
    norm(&diff) / scale
}
