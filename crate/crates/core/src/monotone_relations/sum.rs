use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{resolvent, MonotoneRelation};
use crate::error::{ensure, Error, Result};
use crate::linalg::spectral_norm;

const PICARD_TOL: f64 = 1e-12;
const PICARD_MAX_ITER: usize = 10_000;

/// A single-valued map with a known Lipschitz bound.
pub trait LipschitzMap: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;
    fn lipschitz(&self) -> f64;
}

#[derive(Debug, Clone)]
pub struct LinearMap {
    matrix: DMatrix<f64>,
    lip: f64,
}

impl LinearMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        ensure!(matrix.is_square(), "linear map must be square");
        let lip = spectral_norm(&matrix);
        Ok(Self { matrix, lip })
    }
}

impl LipschitzMap for LinearMap {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }
    fn lipschitz(&self) -> f64 {
        self.lip
    }
}

/// A closure together with a caller-supplied Lipschitz bound.
#[derive(Clone)]
pub struct FnMap {
    dim: usize,
    lip: f64,
    f: Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>,
}

impl FnMap {
    pub fn new<F>(dim: usize, lip: f64, f: F) -> Result<Self>
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        ensure!(lip.is_finite() && lip >= 0.0, "Lipschitz bound must be finite and nonnegative, got {lip}");
        Ok(Self { dim, lip, f: Arc::new(f) })
    }
}

impl fmt::Debug for FnMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnMap").field("dim", &self.dim).field("lip", &self.lip).finish()
    }
}

impl LipschitzMap for FnMap {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.f)(x)
    }
    fn lipschitz(&self) -> f64 {
        self.lip
    }
}

/// `A + B` for monotone `A` and monotone Lipschitz `B`, resolved by Picard iteration of
/// `u ↦ J_λ^A(y − λ B(u))`.
#[derive(Debug, Clone)]
pub struct SumWithLipschitz {
    a: Arc<dyn MonotoneRelation>,
    b: Arc<dyn LipschitzMap>,
    mu: f64,
}

/// Builds `A + B`. Resolving at `λ` requires `λ·Lip(B) < mu ≤ 1`.
pub fn sum_with_lipschitz(
    a: Arc<dyn MonotoneRelation>,
    b: Arc<dyn LipschitzMap>,
    mu: f64,
) -> Result<SumWithLipschitz> {
    ensure!(a.dim() == b.dim(), "dimension mismatch: relation {} vs map {}", a.dim(), b.dim());
    ensure!(b.lipschitz().is_finite(), "Lipschitz bound must be finite");
    ensure!(mu > 0.0 && mu <= 1.0, "contraction parameter must lie in (0, 1], got {mu}");
    Ok(SumWithLipschitz { a, b, mu })
}

impl SumWithLipschitz {
    pub fn max_lambda(&self) -> f64 {
        let lip = self.b.lipschitz();
        if lip == 0.0 {
            f64::INFINITY
        } else {
            self.mu / lip
        }
    }
}

impl MonotoneRelation for SumWithLipschitz {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn resolve(&self, lambda: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        let q = lambda * self.b.lipschitz();
        if q >= self.mu {
            return Err(Error::ParameterOutOfRange(format!(
                "λ·Lip(B) = {q} is not below {}",
                self.mu
            )));
        }
        let mut u = resolvent(self.a.as_ref(), lambda, y)?;
        let mut last = f64::NAN;
        for _ in 0..PICARD_MAX_ITER {
            let next = resolvent(self.a.as_ref(), lambda, &(y - self.b.apply(&u) * lambda))?;
            last = (&next - &u).norm();
            u = next;
            if last <= PICARD_TOL {
                return Ok(u);
            }
        }
        Err(Error::Convergence { iterations: PICARD_MAX_ITER, residual: last })
    }

    fn contains_origin(&self) -> bool {
        self.a.contains_origin() && self.b.apply(&DVector::zeros(self.dim())).norm() == 0.0
    }

    fn is_bounded(&self) -> bool {
        self.a.is_bounded()
    }

    fn name(&self) -> String {
        format!("{} + lipschitz", self.a.name())
    }

    fn inclusion_residual(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<f64> {
        self.a.inclusion_residual(x, &(v - self.b.apply(x)))
    }
}
