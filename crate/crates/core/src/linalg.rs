//! Small dense linear-algebra helpers shared by the modules.

use nalgebra::{DMatrix, DVector};

/// Symmetric part `(A + Aᵀ)/2`.
pub fn sym_part(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Largest absolute entry of `A − Aᵀ`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    (a - a.transpose()).amax()
}

/// Smallest eigenvalue of the symmetric part. Empty matrices give `+∞`.
pub fn min_sym_eig(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    sym_part(a).symmetric_eigenvalues().min()
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone().singular_values().max()
}

/// Spectral norm of a symmetric matrix via its eigenvalues.
pub fn sym_spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    sym_part(a).symmetric_eigenvalues().amax()
}

/// Largest singular value of a linear map given by `apply` and its transpose `apply_t`,
/// estimated with `iters` steps of power iteration on `AᵀA` started from `start`.
pub fn power_iteration_norm<F, G>(apply: F, apply_t: G, start: DVector<f64>, iters: usize) -> f64
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut x = start;
    let n0 = x.norm();
    if n0 == 0.0 {
        return 0.0;
    }
    x /= n0;
    let mut est = 0.0;
    for _ in 0..iters {
        let y = apply_t(&apply(&x));
        let ny = y.norm();
        if ny == 0.0 {
            return 0.0;
        }
        est = ny;
        x = y / ny;
    }
    est.sqrt()
}
