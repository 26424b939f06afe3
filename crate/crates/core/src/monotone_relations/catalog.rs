//! Relations with closed-form resolvents.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{MonotoneRelation, Structure};
use crate::error::{ensure, Result};
use crate::linalg::{min_sym_eig, spectral_norm};

/// Number of independent components of a symmetric 3×3 matrix.
pub const SYM3_DIM: usize = 6;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Trace of a symmetric matrix in orthonormal coordinates
/// `[T11, T22, T33, √2·T12, √2·T13, √2·T23]`.
pub fn sym3_trace(c: &[f64]) -> f64 {
    c[0] + c[1] + c[2]
}

/// Coordinates of `f·I`, the adjoint of the trace.
pub fn trace_adjoint(f: f64) -> [f64; SYM3_DIM] {
    [f, f, f, 0.0, 0.0, 0.0]
}

/// Deviatoric part `T − (trace T/3) I`.
pub fn sym3_dev(c: &[f64]) -> [f64; SYM3_DIM] {
    let m = sym3_trace(c) / 3.0;
    [c[0] - m, c[1] - m, c[2] - m, c[3], c[4], c[5]]
}

/// Orthonormal basis (6×5) of the trace-free symmetric matrices.
pub fn deviatoric_basis() -> DMatrix<f64> {
    let s6 = 6f64.sqrt();
    #[rustfmt::skip]
    let cols = [
        1.0 / SQRT2, -1.0 / SQRT2, 0.0, 0.0, 0.0, 0.0,
        1.0 / s6, 1.0 / s6, -2.0 / s6, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
    ];
    DMatrix::from_column_slice(SYM3_DIM, 5, &cols)
}

/// One piece of a scalar monotone graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Branch {
    /// `v = slope·x + offset` for `x ∈ [lo, hi]`.
    Graph { lo: f64, hi: f64, slope: f64, offset: f64 },
    /// `x = at`, `v ∈ [vmin, vmax]`.
    Vertical { at: f64, vmin: f64, vmax: f64 },
}

/// Scalar maximal monotone laws, described piece by piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarLaw {
    Zero,
    Linear { slope: f64 },
    /// Subdifferential of `weight·|x|`.
    Sign { weight: f64 },
    /// `x ↦ clamp(x, −level, level)`.
    Saturation { level: f64 },
}

impl ScalarLaw {
    pub fn branches(&self) -> Vec<Branch> {
        let inf = f64::INFINITY;
        match *self {
            ScalarLaw::Zero => vec![Branch::Graph { lo: -inf, hi: inf, slope: 0.0, offset: 0.0 }],
            ScalarLaw::Linear { slope } => vec![Branch::Graph { lo: -inf, hi: inf, slope, offset: 0.0 }],
            ScalarLaw::Sign { weight } => vec![
                Branch::Graph { lo: -inf, hi: 0.0, slope: 0.0, offset: -weight },
                Branch::Vertical { at: 0.0, vmin: -weight, vmax: weight },
                Branch::Graph { lo: 0.0, hi: inf, slope: 0.0, offset: weight },
            ],
            ScalarLaw::Saturation { level } => vec![
                Branch::Graph { lo: -inf, hi: -level, slope: 0.0, offset: -level },
                Branch::Graph { lo: -level, hi: level, slope: 1.0, offset: 0.0 },
                Branch::Graph { lo: level, hi: inf, slope: 0.0, offset: level },
            ],
        }
    }
}

/// `A(x) = {0}`.
#[derive(Debug, Clone)]
pub struct ZeroRelation {
    zero: DMatrix<f64>,
}

impl ZeroRelation {
    pub fn new(dim: usize) -> Self {
        Self { zero: DMatrix::zeros(dim, dim) }
    }
}

impl MonotoneRelation for ZeroRelation {
    fn dim(&self) -> usize {
        self.zero.nrows()
    }
    fn resolve(&self, _lambda: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(y.clone())
    }
    fn contains_origin(&self) -> bool {
        true
    }
    fn is_bounded(&self) -> bool {
        true
    }
    fn name(&self) -> String {
        "zero".into()
    }
    fn inclusion_residual(&self, _x: &DVector<f64>, v: &DVector<f64>) -> Option<f64> {
        Some(v.norm())
    }
    fn structure(&self) -> Structure<'_> {
        Structure::Linear(&self.zero)
    }
    fn branch_laws(&self) -> Option<Vec<ScalarLaw>> {
        Some(vec![ScalarLaw::Zero; self.dim()])
    }
}

/// `A(x) = {P x}` with `P + Pᵀ` positive semidefinite.
#[derive(Debug, Clone)]
pub struct LinearRelation {
    matrix: DMatrix<f64>,
}

impl LinearRelation {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        ensure!(matrix.is_square() && matrix.nrows() > 0, "linear relation needs a square matrix");
        let floor = -1e-12 * spectral_norm(&matrix).max(1.0);
        let m = min_sym_eig(&matrix);
        ensure!(m >= floor, "linear relation is not monotone: min eigenvalue of symmetric part {m}");
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: DMatrix::identity(dim, dim) }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl MonotoneRelation for LinearRelation {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn resolve(&self, lambda: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.dim();
        let sys = DMatrix::identity(n, n) + &self.matrix * lambda;
        sys.lu().solve(y).ok_or_else(|| crate::error::Error::Resolvent {
            reason: "singular linear resolvent".into(),
            residual: f64::NAN,
        })
    }
    fn contains_origin(&self) -> bool {
        true
    }
    fn is_bounded(&self) -> bool {
        self.matrix.iter().all(|x| *x == 0.0)
    }
    fn name(&self) -> String {
        "linear".into()
    }
    fn inclusion_residual(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<f64> {
        Some((v - &self.matrix * x).norm())
    }
    fn structure(&self) -> Structure<'_> {
        Structure::Linear(&self.matrix)
    }
    fn branch_laws(&self) -> Option<Vec<ScalarLaw>> {
        let n = self.dim();
        let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || self.matrix[(i, j)] == 0.0));
        diagonal.then(|| (0..n).map(|i| ScalarLaw::Linear { slope: self.matrix[(i, i)] }).collect())
    }
}

/// Subdifferential of `weight·‖x‖` (Euclidean); in one dimension the sign relation.
/// The resolvent is the block soft threshold.
#[derive(Debug, Clone)]
pub struct SoftThreshold {
    dim: usize,
    weight: f64,
}

impl SoftThreshold {
    pub fn new(dim: usize, weight: f64) -> Result<Self> {
        ensure!(dim > 0, "dimension must be positive");
        ensure!(weight.is_finite() && weight >= 0.0, "weight must be nonnegative, got {weight}");
        Ok(Self { dim, weight })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

impl MonotoneRelation for SoftThreshold {
    fn dim(&self) -> usize {
        self.dim
    }
    fn resolve(&self, lambda: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        let r = y.norm();
        let t = lambda * self.weight;
        if r <= t {
            Ok(DVector::zeros(self.dim))
        } else {
            Ok(y * ((r - t) / r))
        }
    }
    fn contains_origin(&self) -> bool {
        true
    }
    fn is_bounded(&self) -> bool {
        true
    }
    fn name(&self) -> String {
        format!("soft_threshold(weight={})", self.weight)
    }
    fn inclusion_residual(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<f64> {
        let r = x.norm();
        if r == 0.0 {
            Some((v.norm() - self.weight).max(0.0))
        } else {
            Some((v - x * (self.weight / r)).norm())
        }
    }
    fn branch_laws(&self) -> Option<Vec<ScalarLaw>> {
        (self.dim == 1).then(|| vec![ScalarLaw::Sign { weight: self.weight }])
    }
}

/// Saturation `x ↦ P_{ball(level)}(x)`, the projection onto a centered ball.
#[derive(Debug, Clone)]
pub struct BallSaturation {
    dim: usize,
    level: f64,
}

impl BallSaturation {
    pub fn new(dim: usize, level: f64) -> Result<Self> {
        ensure!(dim > 0, "dimension must be positive");
        ensure!(level.is_finite() && level > 0.0, "saturation level must be positive, got {level}");
        Ok(Self { dim, level })
    }

    fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        let r = x.norm();
        if r <= self.level {
            x.clone()
        } else {
            x * (self.level / r)
        }
    }
}

/// Resolvent of the ball projection: `x + λ P(x) = y`, solved by case analysis on `|x| ≤ s`.
fn ball_saturation_resolvent(level: f64, lambda: f64, y: &DVector<f64>) -> DVector<f64> {
    let r = y.norm();
    if r <= level * (1.0 + lambda) {
        y / (1.0 + lambda)
    } else {
        y * ((r - lambda * level) / r)
    }
}

impl MonotoneRelation for BallSaturation {
    fn dim(&self) -> usize {
        self.dim
    }
    fn resolve(&self, lambda: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(ball_saturation_resolvent(self.level, lambda, y))
    }
    fn contains_origin(&self) -> bool {
        true
    }
    fn is_bounded(&self) -> bool {
        true
    }
    fn name(&self) -> String {
        format!("ball_saturation(level={})", self.level)
    }
    fn inclusion_residual(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<f64> {
        Some((v - self.project(x)).norm())
    }
    fn branch_laws(&self) -> Option<Vec<ScalarLaw>> {
        (self.dim == 1).then(|| vec![ScalarLaw::Saturation { level: self.level }])
    }
}

/// Plastic-flow law on symmetric 3×3 matrices: `T ↦ P_{ball(level)}(dev T)`.
///
/// Bounded, monotone (a projection onto the closed convex set `ball ∩ trace-free`),
/// `(0, 0)` in the graph, and every output is trace-free.
#[derive(Debug, Clone)]
pub struct DeviatoricSaturation {
    level: f64,
}

impl DeviatoricSaturation {
    pub fn new(level: f64) -> Result<Self> {
        ensure!(level.is_finite() && level > 0.0, "saturation level must be positive, got {level}");
        Ok(Self { level })
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn apply(&self, t: &DVector<f64>) -> DVector<f64> {
        let d = DVector::from_row_slice(&sym3_dev(t.as_slice()));
        let r = d.norm();
        if r <= self.level {
            d
        } else {
            d * (self.level / r)
        }
    }

    /// Restriction to the invariant plane spanned by `diag(1,−1,0)/√2` and `I/√3`.
    /// On it the law is a scalar saturation in the first coordinate and zero in the second.
    pub fn planar_restriction(level: f64) -> Result<SubspaceRestriction> {
        let s3 = 3f64.sqrt();
        #[rustfmt::skip]
        let basis = DMatrix::from_column_slice(SYM3_DIM, 2, &[
            1.0 / SQRT2, -1.0 / SQRT2, 0.0, 0.0, 0.0, 0.0,
            1.0 / s3, 1.0 / s3, 1.0 / s3, 0.0, 0.0, 0.0,
        ]);
        SubspaceRestriction::new(Arc::new(Self::new(level)?), basis)?
            .with_laws(vec![ScalarLaw::Saturation { level }, ScalarLaw::Zero])
    }
}

impl MonotoneRelation for DeviatoricSaturation {
    fn dim(&self) -> usize {
        SYM3_DIM
    }
    fn resolve(&self, lambda: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        // the output of the law is trace-free, so the isotropic part passes through
        let dev = DVector::from_row_slice(&sym3_dev(y.as_slice()));
        let iso = y - &dev;
        Ok(iso + ball_saturation_resolvent(self.level, lambda, &dev))
    }
    fn contains_origin(&self) -> bool {
        true
    }
    fn is_bounded(&self) -> bool {
        true
    }
    fn name(&self) -> String {
        format!("deviatoric_saturation(level={})", self.level)
    }
    fn inclusion_residual(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<f64> {
        Some((v - self.apply(x)).norm())
    }
}

/// Restriction of a relation to a subspace it leaves invariant, in the coordinates of an
/// orthonormal basis `Q`: `resolve(λ, y) = Qᵀ J_λ(Q y)`.
#[derive(Debug, Clone)]
pub struct SubspaceRestriction {
    base: Arc<dyn MonotoneRelation>,
    basis: DMatrix<f64>,
    laws: Option<Vec<ScalarLaw>>,
}

impl SubspaceRestriction {
    pub fn new(base: Arc<dyn MonotoneRelation>, basis: DMatrix<f64>) -> Result<Self> {
        ensure!(basis.nrows() == base.dim(), "basis rows must match the relation dimension");
        let k = basis.ncols();
        let gram = basis.transpose() * &basis - DMatrix::<f64>::identity(k, k);
        ensure!(gram.amax() <= 1e-12, "restriction basis is not orthonormal");
        Ok(Self { base, basis, laws: None })
    }

    pub fn with_laws(mut self, laws: Vec<ScalarLaw>) -> Result<Self> {
        ensure!(laws.len() == self.basis.ncols(), "one law per restricted coordinate");
        self.laws = Some(laws);
        Ok(self)
    }
}

impl MonotoneRelation for SubspaceRestriction {
    fn dim(&self) -> usize {
        self.basis.ncols()
    }
    fn resolve(&self, lambda: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        let full = self.base.resolve(lambda, &(&self.basis * y))?;
        Ok(self.basis.transpose() * full)
    }
    fn contains_origin(&self) -> bool {
        self.base.contains_origin()
    }
    fn is_bounded(&self) -> bool {
        self.base.is_bounded()
    }
    fn name(&self) -> String {
        format!("{} restricted to {} dims", self.base.name(), self.dim())
    }
    fn inclusion_residual(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<f64> {
        self.base.inclusion_residual(&(&self.basis * x), &(&self.basis * v))
    }
    fn branch_laws(&self) -> Option<Vec<ScalarLaw>> {
        self.laws.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monotone_relations::resolvent;
    use rand::{Rng, SeedableRng};

    /// Three-branch case analysis of `x + λ·w·sign(x) ∋ y`.
    fn sign_resolvent_oracle(w: f64, lambda: f64, y: f64) -> f64 {
        if y > lambda * w {
            y - lambda * w
        } else if y < -lambda * w {
            y + lambda * w
        } else {
            0.0
        }
    }

    #[test]
    fn soft_threshold_matches_case_analysis() {
        let a = SoftThreshold::new(1, 1.3).unwrap();
        for y in [-5.0, -1.3, -0.2, 0.0, 0.4, 1.29, 1.31, 7.0] {
            for lambda in [0.1, 1.0, 2.5] {
                let got = resolvent(&a, lambda, &DVector::from_vec(vec![y])).unwrap()[0];
                assert!((got - sign_resolvent_oracle(1.3, lambda, y)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn deviatoric_outputs_are_trace_free() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let a = DeviatoricSaturation::new(0.8).unwrap();
        for _ in 0..200 {
            let t = DVector::from_fn(6, |_, _| rng.gen_range(-4.0..4.0));
            assert!(sym3_trace(a.apply(&t).as_slice()).abs() <= 1e-12);
            assert!(a.apply(&t).norm() <= 0.8 + 1e-12);
        }
    }

    #[test]
    fn deviatoric_basis_is_orthonormal_and_trace_free() {
        let b = deviatoric_basis();
        let g = b.transpose() * &b;
        assert!((g - DMatrix::<f64>::identity(5, 5)).amax() < 1e-15);
        for j in 0..5 {
            assert!(sym3_trace(b.column(j).as_slice()).abs() < 1e-15);
        }
    }

    #[test]
    fn planar_restriction_is_a_saturation() {
        let a = DeviatoricSaturation::planar_restriction(1.0).unwrap();
        let x = resolvent(&a, 0.5, &DVector::from_vec(vec![3.0, 2.0])).unwrap();
        // first coordinate: x + 0.5·clamp(x) = 3 with |x| > 1 → x = 2.5; second passes through
        assert!((x[0] - 2.5).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
        let x = resolvent(&a, 0.5, &DVector::from_vec(vec![0.9, -1.0])).unwrap();
        assert!((x[0] - 0.6).abs() < 1e-14 && (x[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn linear_relation_rejects_non_monotone() {
        assert!(LinearRelation::new(DMatrix::from_row_slice(1, 1, &[-1.0])).is_err());
        let skew = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(LinearRelation::new(skew).is_ok());
    }

    #[test]
    fn scalar_laws_branches_cover_the_line() {
        for law in [ScalarLaw::Sign { weight: 1.0 }, ScalarLaw::Saturation { level: 2.0 }] {
            let b = law.branches();
            assert_eq!(b.len(), 3);
        }
    }
}
