//! Forward–backward iteration for stationary inclusions `S x + A(x) ∋ b`, where `S` is a
//! matrix with positive definite symmetric part and `A` is known through its resolvent.

use nalgebra::{DMatrix, DVector};

use super::{BlockDiagonal, MonotoneRelation};
use crate::error::{Error, Result};
use crate::linalg::{min_sym_eig, spectral_norm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbOptions {
    /// Stop once both the step and the a-posteriori distance bound fall below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FbOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FbOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    /// Norm of the last step, `|x_{k+1} − x_k|`.
    pub residual: f64,
}

/// `x ← J_γ(x − γ(S x − b))` with `γ = m/‖S‖²`, `m` the smallest eigenvalue of the
/// symmetric part of `S`. The forward map is then a contraction with factor
/// `q = sqrt(1 − m²/‖S‖²)`. When `S` is dominated by its skew part this factor is close
/// to one, and Douglas–Rachford with an implicit linear step is used instead whenever
/// its certified rate is smaller.
pub fn forward_backward(
    s: &DMatrix<f64>,
    relation: &dyn MonotoneRelation,
    b: &DVector<f64>,
    x0: Option<&DVector<f64>>,
    opts: FbOptions,
) -> Result<FbOutcome> {
    iterate(s, |g, y| relation.resolve(g, y), b, x0, opts)
}

fn iterate<R>(
    s: &DMatrix<f64>,
    resolve: R,
    b: &DVector<f64>,
    x0: Option<&DVector<f64>>,
    opts: FbOptions,
) -> Result<FbOutcome>
where
    R: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let margin = min_sym_eig(s);
    if !(margin > 0.0) {
        return Err(Error::Contract(format!(
            "step operator symmetric part not positive (min eigenvalue {margin})"
        )));
    }
    let norm = spectral_norm(s);
    let gamma = margin / (norm * norm);
    let q = (1.0 - (margin / norm).powi(2)).max(0.0).sqrt();
    if q > 0.9 {
        if let Some(dr) = douglas_rachford_setup(s, norm, margin) {
            if dr.rate < q {
                return douglas_rachford(s, &resolve, b, x0, opts, dr);
            }
        }
    }
    let factor = if q < 1.0 { q / (1.0 - q) } else { f64::INFINITY };

    let mut x = match x0 {
        Some(x0) => x0.clone(),
        None => s.clone().lu().solve(b).unwrap_or_else(|| b.clone()),
    };
    let mut history: Vec<f64> = Vec::new();
    for it in 1..=opts.max_iter {
        let forward = &x - (s * &x - b) * gamma;
        let next = resolve(gamma, &forward)?;
        let step = (&next - &x).norm();
        x = next;
        if step <= opts.tol && step * factor <= opts.tol {
            return Ok(FbOutcome { x, iterations: it, residual: step });
        }
        watch(&mut history, step)?;
    }
    Err(Error::Convergence {
        iterations: opts.max_iter,
        residual: history.last().copied().unwrap_or(f64::NAN),
    })
}

fn watch(history: &mut Vec<f64>, step: f64) -> Result<()> {
    history.push(step);
    if history.len() > 100 {
        let old = history[history.len() - 101];
        if step > 10.0 * old && old > 0.0 {
            return Err(Error::Resolvent {
                reason: format!("iteration residual grew from {old:e} to {step:e} over 100 iterations"),
                residual: step,
            });
        }
    }
    if !step.is_finite() {
        return Err(Error::Resolvent { reason: "non-finite iterate".into(), residual: step });
    }
    Ok(())
}

struct DrSetup {
    gamma: f64,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    /// Contraction factor `(1 + ‖R‖)/2` of the averaged map, `R = (I − γS)(I + γS)⁻¹`.
    rate: f64,
}

/// Picks `γ` from a geometric family around `1/sqrt(m‖S‖)` minimizing `‖R‖`.
fn douglas_rachford_setup(s: &DMatrix<f64>, norm: f64, margin: f64) -> Option<DrSetup> {
    let n = s.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let centre = 1.0 / (margin * norm).sqrt();
    let mut best: Option<DrSetup> = None;
    for j in -6..=6 {
        let gamma = centre * 2f64.powf(j as f64 * 0.5);
        let lu = (&id + s * gamma).lu();
        let inv = lu.try_inverse()?;
        let c = spectral_norm(&((&id - s * gamma) * inv));
        let rate = 0.5 * (1.0 + c);
        if best.as_ref().is_none_or(|b| rate < b.rate) {
            best = Some(DrSetup { gamma, lu: (&id + s * gamma).lu(), rate });
        }
    }
    best
}

/// Douglas–Rachford: `x = J_{γA}(z)`, `y = (I + γS)⁻¹(2x − z + γb)`, `z ← z + y − x`.
/// The averaged map contracts with `rate`, so `|x − x*| ≤ |Δz|/(1 − rate)`.
fn douglas_rachford<R>(
    s: &DMatrix<f64>,
    resolve: &R,
    b: &DVector<f64>,
    x0: Option<&DVector<f64>>,
    opts: FbOptions,
    dr: DrSetup,
) -> Result<FbOutcome>
where
    R: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let DrSetup { gamma, lu, rate } = dr;
    let singular = || Error::Resolvent { reason: "singular linear block".into(), residual: f64::NAN };
    let start = match x0 {
        Some(x0) => x0.clone(),
        None => lu.solve(&(b * gamma)).ok_or_else(singular)?,
    };
    let mut z = &start + (b - s * &start) * gamma;
    let factor = 1.0 / (1.0 - rate);
    let mut history: Vec<f64> = Vec::new();
    for it in 1..=opts.max_iter {
        let x = resolve(gamma, &z)?;
        let y = lu.solve(&(&x * 2.0 - &z + b * gamma)).ok_or_else(singular)?;
        let dz = y - &x;
        let step = dz.norm();
        if step <= opts.tol && step * factor <= opts.tol {
            return Ok(FbOutcome { x, iterations: it, residual: step });
        }
        z += dz;
        watch(&mut history, step)?;
    }
    Err(Error::Convergence {
        iterations: opts.max_iter,
        residual: history.last().copied().unwrap_or(f64::NAN),
    })
}

/// Solves `S x + N(x) ∋ b` where `N` acts only on the coordinates covered by its blocks.
///
/// The uncovered coordinates enter linearly and are eliminated exactly through the Schur
/// complement, whose symmetric part is at least as positive as that of `S`; forward–backward
/// then runs on the covered coordinates only.
pub fn solve_split(
    s: &DMatrix<f64>,
    blocks: &BlockDiagonal,
    b: &DVector<f64>,
    x0: Option<&DVector<f64>>,
    opts: FbOptions,
) -> Result<FbOutcome> {
    let n = s.nrows();
    let active = blocks.active_coords();
    let singular = || Error::Resolvent { reason: "singular linear block".into(), residual: f64::NAN };
    if active.is_empty() {
        let x = s.clone().lu().solve(b).ok_or_else(singular)?;
        let residual = (s * &x - b).norm();
        return Ok(FbOutcome { x, iterations: 1, residual });
    }
    let mut is_active = vec![false; n];
    for &i in &active {
        is_active[i] = true;
    }
    let passive: Vec<usize> = (0..n).filter(|i| !is_active[*i]).collect();
    let sub = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |i, j| s[(rows[i], cols[j])]);
    let pick = |v: &DVector<f64>, idx: &[usize]| DVector::from_fn(idx.len(), |i, _| v[idx[i]]);

    let s_aa = sub(&active, &active);
    let b_a = pick(b, &active);
    let (schur, rhs, back) = if passive.is_empty() {
        (s_aa, b_a, None)
    } else {
        let s_ap = sub(&active, &passive);
        let s_pa = sub(&passive, &active);
        let b_p = pick(b, &passive);
        let lu = sub(&passive, &passive).lu();
        let inv_s_pa = lu.solve(&s_pa).ok_or_else(singular)?;
        let inv_b_p = lu.solve(&b_p).ok_or_else(singular)?;
        let schur = &s_aa - &s_ap * &inv_s_pa;
        let rhs = &b_a - &s_ap * &inv_b_p;
        (schur, rhs, Some((inv_s_pa, inv_b_p)))
    };
    let z0 = x0.map(|x| pick(x, &active));
    let local = blocks.localized(&active);
    let out = iterate(&schur, |g, y| local.resolve(g, y), &rhs, z0.as_ref(), opts)?;

    let mut x = DVector::zeros(n);
    for (i, &c) in active.iter().enumerate() {
        x[c] = out.x[i];
    }
    if let Some((inv_s_pa, inv_b_p)) = back {
        let xp = inv_b_p - inv_s_pa * &out.x;
        for (i, &c) in passive.iter().enumerate() {
            x[c] = xp[i];
        }
    }
    Ok(FbOutcome { x, iterations: out.iterations, residual: out.residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monotone_relations::{SoftThreshold, ZeroRelation};
    use std::sync::Arc;

    #[test]
    fn zero_relation_reduces_to_linear_solve() {
        let s = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, -1.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let out = forward_backward(&s, &ZeroRelation::new(2), &b, None, FbOptions::default()).unwrap();
        assert!((s * out.x - b).norm() < 1e-12);
    }

    #[test]
    fn scalar_sign_step() {
        // 10u + sign(u) ∋ 2 → u = 0.1
        let s = DMatrix::from_element(1, 1, 10.0);
        let b = DVector::from_element(1, 2.0);
        let a = SoftThreshold::new(1, 1.0).unwrap();
        let out = forward_backward(&s, &a, &b, None, FbOptions { tol: 1e-14, max_iter: 100 }).unwrap();
        assert!((out.x[0] - 0.1).abs() < 1e-14);
    }

    #[test]
    fn rejects_indefinite_operator() {
        let s = DMatrix::from_element(1, 1, -1.0);
        let b = DVector::from_element(1, 1.0);
        assert!(forward_backward(&s, &ZeroRelation::new(1), &b, None, FbOptions::default()).is_err());
    }

    #[test]
    fn skew_dominated_operator_converges() {
        let s = DMatrix::from_row_slice(2, 2, &[0.1, 20.0, -20.0, 0.1]);
        let b = DVector::from_vec(vec![3.0, -1.0]);
        let a = SoftThreshold::new(2, 0.5).unwrap();
        let out = forward_backward(&s, &a, &b, None, FbOptions { tol: 1e-13, max_iter: 100_000 }).unwrap();
        assert!(out.iterations < 20_000, "{}", out.iterations);
        let v = &b - &s * &out.x;
        assert!(a.inclusion_residual(&out.x, &v).unwrap() < 1e-10);
    }

    #[test]
    fn split_solve_agrees_with_full_iteration() {
        let s = DMatrix::from_row_slice(3, 3, &[5.0, 1.0, 0.5, -1.0, 2.0, 0.0, 0.3, 0.0, 1.0]);
        let b = DVector::from_vec(vec![3.0, -1.0, 0.7]);
        let blocks = BlockDiagonal::new(3, vec![(vec![0], Arc::new(SoftThreshold::new(1, 1.0).unwrap()) as _)]).unwrap();
        let opts = FbOptions { tol: 1e-13, max_iter: 100_000 };
        let split = solve_split(&s, &blocks, &b, None, opts).unwrap();
        let full = forward_backward(&s, &blocks, &b, None, opts).unwrap();
        assert!((split.x - full.x).norm() < 1e-11);
        assert!(split.iterations < full.iterations);
    }
}
