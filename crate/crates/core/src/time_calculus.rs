//! Discrete causal time derivative and its companions.
//!
//! The derivative is the backward difference `(u_k − u_{k−1})/dt` with the
//! implicit zero past `u_{−1} = 0`; its inverse is the causal cumulative sum
//! `dt·Σ_{j≤k} f_j`. Neither stencil depends on `ρ`: the weight only enters
//! through norms.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{ensure, Error, Result};
use crate::linalg::power_iteration_norm;
use crate::weighted_space::{weighted_norm, TimeGrid, WeightedSignal};

/// Backward difference with the implicit zero past.
pub fn derivative(u: &WeightedSignal) -> WeightedSignal {
    let dt = u.grid().dt();
    let vals = u.values();
    let mut out = DMatrix::zeros(u.dim(), u.len());
    out.set_column(0, &(vals.column(0) / dt));
    for k in 1..u.len() {
        out.set_column(k, &((vals.column(k) - vals.column(k - 1)) / dt));
    }
    u.with_values(out).expect("same shape")
}

/// Causal cumulative sum, the inverse of [`derivative`].
pub fn integrate(f: &WeightedSignal) -> WeightedSignal {
    let dt = f.grid().dt();
    let vals = f.values();
    let mut out = DMatrix::zeros(f.dim(), f.len());
    let mut acc = DVector::zeros(f.dim());
    for k in 0..f.len() {
        acc += vals.column(k) * dt;
        out.set_column(k, &acc);
    }
    f.with_values(out).expect("same shape")
}

/// `(τ_h u)_k = u_{k+h}`, zero outside the grid.
pub fn translate(u: &WeightedSignal, h_steps: isize) -> WeightedSignal {
    let n = u.len() as isize;
    let mut out = DMatrix::zeros(u.dim(), u.len());
    for k in 0..n {
        let src = k + h_steps;
        if (0..n).contains(&src) {
            out.set_column(k as usize, &u.values().column(src as usize));
        }
    }
    u.with_values(out).expect("same shape")
}

/// `(τ_h u − u)/(h·dt)`.
pub fn difference_quotient(u: &WeightedSignal, h_steps: usize) -> Result<WeightedSignal> {
    ensure!(h_steps >= 1, "difference quotient needs a positive shift");
    let shifted = translate(u, h_steps as isize);
    let scale = 1.0 / (h_steps as f64 * u.grid().dt());
    Ok(shifted.try_sub(u)?.scaled(scale))
}

/// `‖∂u‖_ρ`.
pub fn h1_seminorm(u: &WeightedSignal) -> f64 {
    weighted_norm(&derivative(u))
}

/// `sqrt(‖u‖²_ρ + ‖∂u‖²_ρ)`.
pub fn h1_graph_norm(u: &WeightedSignal) -> f64 {
    (weighted_norm(u).powi(2) + h1_seminorm(u).powi(2)).sqrt()
}

/// Matrix view of the scalar derivative on a grid, used for adjoint and norm analysis.
///
/// Unlike signals, `rho = 0` is allowed here so the unweighted limit can be inspected.
#[derive(Debug, Clone, Copy)]
pub struct DerivativeOperator {
    grid: TimeGrid,
    rho: f64,
}

impl DerivativeOperator {
    pub fn new(grid: TimeGrid, rho: f64) -> Result<Self> {
        ensure!(rho.is_finite() && rho >= 0.0, "rho must be finite and nonnegative, got {rho}");
        Ok(Self { grid, rho })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Backward-difference matrix (scalar state).
    pub fn apply_matrix(&self) -> CsrMatrix<f64> {
        let n = self.grid.len();
        let inv = 1.0 / self.grid.dt();
        let mut coo = CooMatrix::new(n, n);
        for k in 0..n {
            coo.push(k, k, inv);
            if k > 0 {
                coo.push(k, k - 1, -inv);
            }
        }
        CsrMatrix::from(&coo)
    }

    /// Forward-difference matrix `(v_{k+1} − v_k)/dt`, zero beyond the last node.
    fn forward_matrix(&self) -> CsrMatrix<f64> {
        let n = self.grid.len();
        let inv = 1.0 / self.grid.dt();
        let mut coo = CooMatrix::new(n, n);
        for k in 0..n {
            coo.push(k, k, -inv);
            if k + 1 < n {
                coo.push(k, k + 1, inv);
            }
        }
        CsrMatrix::from(&coo)
    }

    /// Cumulative-sum matrix. Only the forward-causal branch (`rho > 0`) exists.
    pub fn invert_matrix(&self) -> Result<DMatrix<f64>> {
        if self.rho <= 0.0 {
            return Err(Error::UnsupportedRegime(format!(
                "inverse derivative requires rho > 0, got {}",
                self.rho
            )));
        }
        let n = self.grid.len();
        let dt = self.grid.dt();
        Ok(DMatrix::from_fn(n, n, |i, j| if j <= i { dt } else { 0.0 }))
    }

    /// Adjoint of `a` with respect to the weighted inner product: `W⁻¹ aᵀ W`.
    pub fn weighted_adjoint(&self, a: &CsrMatrix<f64>) -> CsrMatrix<f64> {
        let at = a.transpose();
        let mut coo = CooMatrix::new(at.nrows(), at.ncols());
        for (i, j, v) in at.triplet_iter() {
            // w_j / w_i = e^{-2ρ(t_j − t_i)}
            let ratio = (-2.0 * self.rho * (j as f64 - i as f64) * self.grid.dt()).exp();
            coo.push(i, j, v * ratio);
        }
        CsrMatrix::from(&coo)
    }

    /// Operator-norm distance between the weighted adjoint of the backward difference and
    /// `−∂ + 2ρ`, on the interior rows `1..n−1`.
    ///
    /// The adjoint acts as `(v_k − e^{−2ρdt} v_{k+1})/dt`, an anticausal stencil, so the
    /// reference realizes `−∂` by the forward difference and the `2ρ` term at node `k+1`.
    /// The interior defect is then `|(1 − e^{−2ρdt})/dt − 2ρ| = O(ρ²dt)`.
    pub fn adjoint_defect(&self) -> f64 {
        let n = self.grid.len();
        let adj = self.weighted_adjoint(&self.apply_matrix());
        let fwd = self.forward_matrix();
        let mut coo = CooMatrix::new(n, n);
        for (i, j, v) in adj.triplet_iter() {
            coo.push(i, j, *v);
        }
        for (i, j, v) in fwd.triplet_iter() {
            coo.push(i, j, *v);
        }
        for k in 0..n - 1 {
            coo.push(k, k + 1, -2.0 * self.rho);
        }
        let diff = CsrMatrix::from(&coo);
        let interior = |x: &DVector<f64>| {
            let mut y = csr_mul(&diff, x);
            y[0] = 0.0;
            y[n - 1] = 0.0;
            y
        };
        let diff_t = diff.transpose();
        let interior_t = |y: &DVector<f64>| {
            let mut z = y.clone();
            z[0] = 0.0;
            z[n - 1] = 0.0;
            csr_mul(&diff_t, &z)
        };
        if diff.values().iter().all(|v| *v == 0.0) {
            return 0.0;
        }
        power_iteration_norm(interior, interior_t, DVector::from_element(n, 1.0), 200)
    }

    /// Norm of the cumulative-sum operator in the weighted space, by power iteration.
    pub fn integrate_norm(&self, iters: usize) -> Result<f64> {
        if self.rho <= 0.0 {
            return Err(Error::UnsupportedRegime(format!(
                "inverse derivative requires rho > 0, got {}",
                self.rho
            )));
        }
        // In the variable x = e^{-ρt} u the operator is a causal convolution with
        // kernel dt·q^m, q = e^{-ρ dt}.
        let q = (-self.rho * self.grid.dt()).exp();
        let dt = self.grid.dt();
        let n = self.grid.len();
        let apply = |x: &DVector<f64>| {
            let mut y = DVector::zeros(n);
            let mut acc = 0.0;
            for k in 0..n {
                acc = q * acc + dt * x[k];
                y[k] = acc;
            }
            y
        };
        let apply_t = |x: &DVector<f64>| {
            let mut y = DVector::zeros(n);
            let mut acc = 0.0;
            for k in (0..n).rev() {
                acc = q * acc + dt * x[k];
                y[k] = acc;
            }
            y
        };
        Ok(power_iteration_norm(apply, apply_t, DVector::from_element(n, 1.0), iters))
    }
}

pub(crate) fn csr_mul(a: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut y = DVector::zeros(a.nrows());
    for (i, row) in a.row_iter().enumerate() {
        y[i] = row
            .col_indices()
            .iter()
            .zip(row.values())
            .map(|(j, v)| v * x[*j])
            .sum();
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weighted_space::{cutoff, Side};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(seed: u64, grid: TimeGrid, dim: usize) -> WeightedSignal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        WeightedSignal::from_fn(grid, dim, 1.0, |_| DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0)))
            .unwrap()
    }

    /// Values on a dyadic lattice, so cumulative sums with a power-of-two step are exact.
    fn dyadic(seed: u64, grid: TimeGrid, dim: usize) -> WeightedSignal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        WeightedSignal::from_fn(grid, dim, 1.0, |_| {
            DVector::from_fn(dim, |_, _| rng.gen_range(-(1i64 << 20)..(1i64 << 20)) as f64 / (1u64 << 20) as f64)
        })
        .unwrap()
    }

    #[test]
    fn derivative_of_ramp_and_constant() {
        let grid = TimeGrid::new(0.0, 0.25, 9).unwrap();
        let ramp = WeightedSignal::scalar(grid, 1.0, |t| t).unwrap();
        let d = derivative(&ramp);
        assert_eq!(d.values()[(0, 0)], 0.0);
        for k in 1..9 {
            assert!((d.values()[(0, k)] - 1.0).abs() < 1e-14);
        }
        let c = WeightedSignal::scalar(grid, 1.0, |_| 3.0).unwrap();
        let d = derivative(&c);
        assert_eq!(d.values()[(0, 0)], 12.0);
        assert!((1..9).all(|k| d.values()[(0, k)] == 0.0));
    }

    #[test]
    fn derivative_undoes_integrate_bitwise() {
        let grid = TimeGrid::new(0.0, 0.125, 50).unwrap();
        let f = dyadic(1, grid, 2);
        assert_eq!(derivative(&integrate(&f)), f);
        let g = random(1, grid, 2);
        assert!(derivative(&integrate(&g)).sup_distance(&g).unwrap() < 1e-13);
    }

    #[test]
    fn integrate_undoes_derivative_with_power_of_two_step() {
        let grid = TimeGrid::new(0.0, 0.125, 50).unwrap();
        let u = dyadic(2, grid, 2);
        assert_eq!(integrate(&derivative(&u)), u);
        let g = random(2, grid, 2);
        assert!(integrate(&derivative(&g)).sup_distance(&g).unwrap() < 1e-14);
    }

    #[test]
    fn integrate_of_indicator_clamps() {
        let grid = TimeGrid::with_horizon(-1.0, 0.1, 3.0).unwrap();
        let f = WeightedSignal::scalar(grid, 1.0, |t| if (0.0..=1.0).contains(&t) { 1.0 } else { 0.0 }).unwrap();
        let u = integrate(&f);
        for k in 0..grid.len() {
            let t = grid.time(k);
            let clamp = t.clamp(0.0, 1.0);
            assert!((u.values()[(0, k)] - clamp).abs() <= 0.1 + 1e-12, "t={t}");
        }
        let z = WeightedSignal::zeros(grid, 1, 1.0).unwrap();
        assert_eq!(integrate(&z), z);
    }

    #[test]
    fn invert_rejects_nonpositive_rho() {
        let grid = TimeGrid::new(0.0, 0.1, 5).unwrap();
        let op = DerivativeOperator::new(grid, 0.0).unwrap();
        assert!(matches!(op.invert_matrix(), Err(Error::UnsupportedRegime(_))));
        assert!(matches!(op.integrate_norm(10), Err(Error::UnsupportedRegime(_))));
        assert!(DerivativeOperator::new(grid, -1.0).is_err());
    }

    #[test]
    fn translate_examples() {
        let grid = TimeGrid::new(0.0, 0.1, 20).unwrap();
        let u = random(3, grid, 2);
        assert_eq!(translate(&u, 0), u);
        let back = translate(&translate(&u, 1), -1);
        for k in 1..20 {
            assert_eq!(back.node(k), u.node(k));
        }
        assert!(back.node(0).iter().all(|x| *x == 0.0));
    }

    #[test]
    fn translate_norm_growth_bounded_by_weight_shift() {
        for seed in 0..20 {
            let grid = TimeGrid::new(0.0, 0.05, 40).unwrap();
            let u = random(seed, grid, 2).with_rho(1.3).unwrap();
            let lhs = weighted_norm(&translate(&u, 1));
            let rhs = (1.3f64 * 0.05).exp() * weighted_norm(&u);
            assert!(lhs <= rhs * (1.0 + 1e-14));
        }
    }

    #[test]
    fn difference_quotient_of_ramp_and_sine() {
        let grid = TimeGrid::new(0.0, 0.01, 100).unwrap();
        let ramp = WeightedSignal::scalar(grid, 1.0, |t| t).unwrap();
        let dq = difference_quotient(&ramp, 1).unwrap();
        for k in 0..99 {
            assert!((dq.values()[(0, k)] - 1.0).abs() < 1e-12);
        }
        let grid = TimeGrid::new(0.0, 1e-3, 5000).unwrap();
        let s = WeightedSignal::scalar(grid, 1.0, f64::sin).unwrap();
        let dq = difference_quotient(&s, 1).unwrap();
        for k in 0..4999 {
            assert!((dq.values()[(0, k)] - grid.time(k).cos()).abs() < 1e-3);
        }
        assert!(difference_quotient(&s, 0).is_err());
    }

    #[test]
    fn difference_quotient_bounded_by_shifted_derivative_norm() {
        // smooth bumps vanishing near the end of the grid, so the zero fill is harmless
        let grid = TimeGrid::new(0.0, 1e-3, 4001).unwrap();
        for (seed, h) in [(1u64, 1usize), (2, 5), (3, 20)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b, c) = (rng.gen_range(0.5..2.0), rng.gen_range(1.0..6.0), rng.gen_range(0.0..3.0));
            let u = WeightedSignal::scalar(grid, 0.8, |t| {
                if t < 3.0 {
                    a * (b * t + c).sin() * (t * (3.0 - t)).powi(2)
                } else {
                    0.0
                }
            })
            .unwrap();
            let lhs = weighted_norm(&difference_quotient(&u, h).unwrap());
            let rhs = (0.8 * h as f64 * 1e-3f64).exp() * h1_seminorm(&u);
            assert!(lhs <= rhs + 10.0 * 1e-3, "h={h}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn difference_quotients_converge_to_derivative() {
        let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&dt| {
                let grid = TimeGrid::with_horizon(0.0, dt, 2.0).unwrap();
                let u = WeightedSignal::scalar(grid, 1.0, |t| (t * (2.0 - t)).powi(2)).unwrap();
                let exact = WeightedSignal::scalar(grid, 1.0, |t| 2.0 * t * (2.0 - t) * (2.0 - 2.0 * t)).unwrap();
                let dq = difference_quotient(&u, 2).unwrap();
                weighted_norm(&dq.try_sub(&exact).unwrap())
            })
            .collect();
        assert!(errs[1] < 0.6 * errs[0] && errs[2] < 0.6 * errs[1], "{errs:?}");
    }

    #[test]
    fn calculus_is_causal() {
        let grid = TimeGrid::new(0.0, 0.1, 30).unwrap();
        let u = random(9, grid, 2);
        let a = grid.time(12);
        for op in [derivative as fn(&WeightedSignal) -> WeightedSignal, integrate] {
            let lhs = cutoff(&op(&u), a, Side::Past);
            let rhs = cutoff(&op(&cutoff(&u, a, Side::Past)), a, Side::Past);
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn adjoint_defect_vanishes_unweighted() {
        let grid = TimeGrid::new(0.0, 1e-2, 200).unwrap();
        assert_eq!(DerivativeOperator::new(grid, 0.0).unwrap().adjoint_defect(), 0.0);
    }

    #[test]
    fn adjoint_defect_small_and_first_order() {
        let grid = TimeGrid::new(0.0, 1e-3, 4000).unwrap();
        let d1 = DerivativeOperator::new(grid, 1.0).unwrap().adjoint_defect();
        assert!(d1 <= 0.01, "{d1}");
        let finer = TimeGrid::new(0.0, 5e-4, 8000).unwrap();
        let d2 = DerivativeOperator::new(finer, 1.0).unwrap().adjoint_defect();
        assert!(d2 <= 0.6 * d1, "{d2} vs {d1}");
    }

    #[test]
    fn weighted_adjoint_satisfies_pairing() {
        let grid = TimeGrid::new(0.0, 0.05, 30).unwrap();
        let op = DerivativeOperator::new(grid, 1.5).unwrap();
        let d = op.apply_matrix();
        let adj = op.weighted_adjoint(&d);
        let u = random(4, grid, 1).with_rho(1.5).unwrap();
        let v = random(5, grid, 1).with_rho(1.5).unwrap();
        let uv = DVector::from_column_slice(u.values().as_slice());
        let vv = DVector::from_column_slice(v.values().as_slice());
        let du = u.with_values(DMatrix::from_column_slice(1, 30, csr_mul(&d, &uv).as_slice())).unwrap();
        let av = v.with_values(DMatrix::from_column_slice(1, 30, csr_mul(&adj, &vv).as_slice())).unwrap();
        let lhs = crate::weighted_space::weighted_inner(&du, &v).unwrap();
        let rhs = crate::weighted_space::weighted_inner(&u, &av).unwrap();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }
}
