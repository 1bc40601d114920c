//! Small dense symmetric solves for the local weighted least squares systems.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

/// Solve `A x = b` for a symmetric positive definite `A` (row-major, n×n)
/// by Cholesky decomposition. Returns `None` when a pivot is non-positive
/// relative to the matrix scale or the solution is not finite.
fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = a.to_vec();
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    for j in 0..n {
        let mut d = l[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        // Relative pivot test: a pivot this far below the diagonal scale
        // means the column is numerically dependent on the previous ones.
        if !(d > scale * 1e-13) {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = l[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    // Forward then back substitution.
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Solve a symmetric PSD system, retrying once with additive diagonal jitter
/// `jitter_rel · trace(A)/n` when the plain solve reports singularity.
pub(crate) fn solve_spd(a: &[f64], b: &[f64], n: usize, jitter_rel: f64) -> Option<Vec<f64>> {
    if let Some(x) = cholesky_solve(a, b, n) {
        return Some(x);
    }
    let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
    let jitter = jitter_rel * trace / n as f64;
    if !(jitter > 0.0) {
        return None;
    }
    let mut aj = a.to_vec();
    for i in 0..n {
        aj[i * n + i] += jitter;
    }
    cholesky_solve(&aj, b, n)
}
