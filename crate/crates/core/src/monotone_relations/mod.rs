//! Maximal monotone relations, accessed through their resolvents.
//!
//! A relation `A ⊆ H ⊕ H` is never stored as a graph. Every consumer goes
//! through `J_λ = (1 + λA)⁻¹`, which is single-valued and nonexpansive when
//! `A` is maximal monotone, and through the Yosida approximation
//! `A_λ = λ⁻¹(1 − J_λ)` built from it.

mod block;
mod catalog;
mod forward_backward;
mod lift;
mod minty;
mod sum;
mod yosida;

use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure, Result};

pub use block::{BlockDiagonal, SplitRelation};
pub use catalog::{
    deviatoric_basis, sym3_dev, sym3_trace, trace_adjoint, Branch, BallSaturation,
    DeviatoricSaturation, LinearRelation, ScalarLaw, SoftThreshold, SubspaceRestriction,
    ZeroRelation, SYM3_DIM,
};
pub use forward_backward::{forward_backward, solve_split, FbOptions, FbOutcome};
pub use lift::{lift, LiftedRelation};
pub use minty::{minty_scan, MintyReport};
pub use sum::{sum_with_lipschitz, FnMap, LinearMap, LipschitzMap, SumWithLipschitz};
pub use yosida::YosidaRelation;

/// How a relation decomposes, so the stepper can pick an exact linear solve or
/// eliminate the coordinates a nonlinearity never touches.
#[derive(Debug, Clone, Copy)]
pub enum Structure<'a> {
    /// Nothing is known beyond the resolvent.
    Opaque,
    /// `A(x) = {P x}` for a monotone matrix `P`.
    Linear(&'a DMatrix<f64>),
    /// `A = K + N` with `K` a monotone matrix and `N` block-diagonal on a subset of coordinates.
    Split {
        linear: &'a DMatrix<f64>,
        nonlinear: &'a BlockDiagonal,
    },
}

/// A maximal monotone relation on `ℝ^dim` defined by its resolvent.
pub trait MonotoneRelation: Send + Sync + Debug {
    fn dim(&self) -> usize;

    /// `(1 + λA)⁻¹(y)`. Callers go through [`resolvent`], which validates `λ` and `y`.
    fn resolve(&self, lambda: f64, y: &DVector<f64>) -> Result<DVector<f64>>;

    /// Whether `(0, 0) ∈ A`.
    fn contains_origin(&self) -> bool;

    /// Whether `A` maps bounded sets to bounded sets.
    fn is_bounded(&self) -> bool;

    fn name(&self) -> String;

    /// Distance from `v` to `A(x)`, when the graph can be evaluated.
    fn inclusion_residual(&self, _x: &DVector<f64>, _v: &DVector<f64>) -> Option<f64> {
        None
    }

    fn structure(&self) -> Structure<'_> {
        Structure::Opaque
    }

    /// Coordinate-wise branch description, for separable relations in low dimension.
    fn branch_laws(&self) -> Option<Vec<ScalarLaw>> {
        None
    }
}

/// Checked resolvent `(1 + λA)⁻¹(y)`.
pub fn resolvent(a: &dyn MonotoneRelation, lambda: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
    ensure!(lambda.is_finite() && lambda > 0.0, "resolvent parameter must be positive, got {lambda}");
    ensure!(
        y.len() == a.dim(),
        "argument has length {}, relation acts on dimension {}",
        y.len(),
        a.dim()
    );
    a.resolve(lambda, y)
}

/// Yosida approximation `A_λ(y) = (y − J_λ y)/λ`.
pub fn yosida(a: &dyn MonotoneRelation, lambda: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(resolvent_split(a, lambda, y)?.1)
}

/// `(J_λ y, A_λ y)` from a single resolvent evaluation.
pub fn resolvent_split(
    a: &dyn MonotoneRelation,
    lambda: f64,
    y: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let x = resolvent(a, lambda, y)?;
    let v = (y - &x) / lambda;
    Ok((x, v))
}
