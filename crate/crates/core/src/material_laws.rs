//! Time-dependent coefficient families `M₀(t)`, `M₁(t)` and the conditions they must meet.
//!
//! A family carries claimed constants (`c₀`, `c₁`, `|M₀|_Lip`, `|M₁|_∞`) next to the
//! sampling closures. The claims feed `ρ₀` and the step-size rule; [`check_conditions`]
//! can only falsify them on samples.

use std::fmt::{self, Write as _};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure, Error, Result};
use crate::linalg::{asymmetry, min_sym_eig, spectral_norm, sym_part};
use crate::weighted_space::{format_full, WeightedSignal};

/// Relative eigenvalue threshold separating kernel from range.
pub const KERNEL_TOL: f64 = 1e-9;
const SYMMETRY_TOL: f64 = 1e-10;
const KERNEL_DEFECT_TOL: f64 = 1e-10;

pub type MatrixFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

/// Scalar coefficient `a·(1 + b·sin(ωt + φ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarCoefficient {
    pub level: f64,
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
}

impl ScalarCoefficient {
    pub fn constant(level: f64) -> Self {
        Self { level, amplitude: 0.0, omega: 0.0, phase: 0.0 }
    }

    pub fn sinusoidal(level: f64, amplitude: f64, omega: f64, phase: f64) -> Self {
        Self { level, amplitude, omega, phase }
    }

    pub fn at(&self, t: f64) -> f64 {
        if self.amplitude == 0.0 {
            self.level
        } else {
            self.level * (1.0 + self.amplitude * (self.omega * t + self.phase).sin())
        }
    }

    pub fn derivative_at(&self, t: f64) -> f64 {
        self.level * self.amplitude * self.omega * (self.omega * t + self.phase).cos()
    }

    pub fn lipschitz(&self) -> f64 {
        (self.level * self.amplitude * self.omega).abs()
    }

    pub fn sup(&self) -> f64 {
        self.level.abs() * (1.0 + self.amplitude.abs())
    }

    /// Lower bound over all `t`.
    pub fn inf(&self) -> f64 {
        if self.level >= 0.0 {
            self.level * (1.0 - self.amplitude.abs())
        } else {
            self.level * (1.0 + self.amplitude.abs())
        }
    }

    pub fn is_constant(&self) -> bool {
        self.amplitude == 0.0 || self.omega == 0.0
    }
}

/// Claimed constants of a family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Claims {
    pub lip_m0: f64,
    pub sup_m1: f64,
    pub c0: f64,
    /// `+∞` when the kernel of `M₀` is trivial.
    pub c1: f64,
}

#[derive(Clone)]
pub struct MaterialFamily {
    dim: usize,
    m0: MatrixFn,
    m1: MatrixFn,
    claims: Claims,
    kernel_basis: DMatrix<f64>,
    range_basis: DMatrix<f64>,
    name: String,
}

impl fmt::Debug for MaterialFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MaterialFamily")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("claims", &self.claims)
            .field("kernel_dim", &self.kernel_basis.ncols())
            .finish()
    }
}

impl MaterialFamily {
    /// General constructor. `kernel_basis` must have orthonormal columns.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        m0: MatrixFn,
        m1: MatrixFn,
        claims: Claims,
        kernel_basis: DMatrix<f64>,
    ) -> Result<Self> {
        ensure!(dim > 0, "dimension must be positive");
        ensure!(kernel_basis.nrows() == dim, "kernel basis has {} rows, expected {dim}", kernel_basis.nrows());
        let gram = kernel_basis.transpose() * &kernel_basis;
        let k = kernel_basis.ncols();
        ensure!(
            k == 0 || (gram - DMatrix::<f64>::identity(k, k)).amax() <= 1e-12,
            "kernel basis columns are not orthonormal"
        );
        ensure!(claims.lip_m0 >= 0.0 && claims.lip_m0.is_finite(), "lip_m0 must be finite and nonnegative");
        ensure!(claims.sup_m1 >= 0.0 && claims.sup_m1.is_finite(), "sup_m1 must be finite and nonnegative");
        ensure!(claims.c0 > 0.0, "c0 must be positive, got {}", claims.c0);
        ensure!(!claims.c1.is_nan(), "c1 must be a number");
        let range_basis = complement(&kernel_basis);
        Ok(Self { dim, m0, m1, claims, kernel_basis, range_basis, name: name.into() })
    }

    /// Constant coefficients; constants are measured from the matrices.
    pub fn constant(m0: DMatrix<f64>, m1: DMatrix<f64>) -> Result<Self> {
        Self::sinusoidal(m0.clone(), DMatrix::zeros(m0.nrows(), m0.ncols()), m1.clone(), DMatrix::zeros(m1.nrows(), m1.ncols()), 0.0, 0.0)
    }

    /// `M₀(t) = A₀ + sin(ωt+φ)·B₀`, `M₁(t) = A₁ + sin(ωt+φ)·B₁`.
    ///
    /// The kernel is that of `A₀` and must also annihilate `B₀`. Claimed constants are
    /// certified bounds: eigenvalues of the base blocks shifted by the amplitude norms.
    pub fn sinusoidal(
        a0: DMatrix<f64>,
        b0: DMatrix<f64>,
        a1: DMatrix<f64>,
        b1: DMatrix<f64>,
        omega: f64,
        phase: f64,
    ) -> Result<Self> {
        let n = a0.nrows();
        for (m, label) in [(&a0, "A0"), (&b0, "B0"), (&a1, "A1"), (&b1, "B1")] {
            ensure!(m.nrows() == n && m.ncols() == n, "{label} must be {n}×{n}");
        }
        let (kernel, range) = kernel_decompose(&a0, KERNEL_TOL)?;
        let scale = spectral_norm(&a0).max(1.0);
        if (&b0 * &kernel).amax() > KERNEL_DEFECT_TOL * scale {
            return Err(Error::Condition {
                condition: "c",
                detail: "oscillating part of M0 does not vanish on the kernel of its mean".into(),
            });
        }
        let restrict = |m: &DMatrix<f64>, basis: &DMatrix<f64>| basis.transpose() * m * basis;
        let c0 = min_sym_eig(&restrict(&a0, &range)) - spectral_norm(&restrict(&b0, &range));
        let c1 = if kernel.ncols() == 0 {
            f64::INFINITY
        } else {
            min_sym_eig(&restrict(&a1, &kernel)) - spectral_norm(&sym_part(&restrict(&b1, &kernel)))
        };
        let claims = Claims {
            lip_m0: omega.abs() * spectral_norm(&b0),
            sup_m1: spectral_norm(&a1) + spectral_norm(&b1),
            c0,
            c1,
        };
        let constant = omega == 0.0 || (b0.amax() == 0.0 && b1.amax() == 0.0);
        let (m0, m1): (MatrixFn, MatrixFn) = if constant {
            let s = phase.sin();
            let m0 = &a0 + &b0 * s;
            let m1 = &a1 + &b1 * s;
            (Arc::new(move |_| m0.clone()), Arc::new(move |_| m1.clone()))
        } else {
            (
                Arc::new(move |t: f64| &a0 + &b0 * (omega * t + phase).sin()),
                Arc::new(move |t: f64| &a1 + &b1 * (omega * t + phase).sin()),
            )
        };
        let name = if constant { "constant" } else { "sinusoidal" };
        Self::new(name, n, m0, m1, claims, kernel)
    }

    /// Replaces the claimed constants, e.g. to state a deliberately wrong claim.
    pub fn with_claims(mut self, claims: Claims) -> Result<Self> {
        ensure!(claims.c0 > 0.0, "c0 must be positive, got {}", claims.c0);
        ensure!(claims.lip_m0 >= 0.0 && claims.sup_m1 >= 0.0, "Lipschitz and sup claims must be nonnegative");
        self.claims = claims;
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn m0(&self, t: f64) -> DMatrix<f64> {
        (self.m0)(t)
    }

    pub fn m1(&self, t: f64) -> DMatrix<f64> {
        (self.m1)(t)
    }

    pub fn claims(&self) -> Claims {
        self.claims
    }

    pub fn lip_m0(&self) -> f64 {
        self.claims.lip_m0
    }

    pub fn sup_m1(&self) -> f64 {
        self.claims.sup_m1
    }

    pub fn c0(&self) -> f64 {
        self.claims.c0
    }

    pub fn c1(&self) -> f64 {
        self.claims.c1
    }

    /// `ι₀` as orthonormal columns.
    pub fn kernel_basis(&self) -> &DMatrix<f64> {
        &self.kernel_basis
    }

    /// `ι₁` as orthonormal columns.
    pub fn range_basis(&self) -> &DMatrix<f64> {
        &self.range_basis
    }
}

/// Orthonormal basis of the orthogonal complement of the columns of `basis`.
fn complement(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let n = basis.nrows();
    let proj = DMatrix::<f64>::identity(n, n) - basis * basis.transpose();
    let eig = proj.symmetric_eigen();
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > 0.5)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Splits the space into kernel and range of a symmetric sample of `M₀`.
///
/// Eigenvalues with `|σ| ≤ tol·σ_max` go to the kernel.
pub fn kernel_decompose(m0: &DMatrix<f64>, tol: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    ensure!(m0.is_square(), "matrix must be square");
    let n = m0.nrows();
    let scale = m0.amax().max(f64::MIN_POSITIVE);
    let asym = asymmetry(m0);
    if asym > tol.max(SYMMETRY_TOL) * scale {
        return Err(Error::Condition { condition: "a", detail: format!("M0 not selfadjoint (asymmetry {asym:e})") });
    }
    let eig = sym_part(m0).symmetric_eigen();
    let smax = eig.eigenvalues.amax();
    let mut kernel = Vec::new();
    let mut range = Vec::new();
    for i in 0..n {
        let col = eig.eigenvectors.column(i).into_owned();
        if eig.eigenvalues[i].abs() <= tol * smax {
            kernel.push(col);
        } else {
            range.push(col);
        }
    }
    let pack = |cols: Vec<DVector<f64>>| {
        if cols.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&cols)
        }
    };
    Ok((pack(kernel), pack(range)))
}

/// Symmetrized central difference `(M₀(t+h) − M₀(t−h))/(2h)`, checked against the claimed
/// Lipschitz bound with slack `10·h·‖second difference‖/h²`.
pub fn m0_prime(family: &MaterialFamily, t: f64, h: f64) -> Result<DMatrix<f64>> {
    ensure!(h > 0.0 && h.is_finite(), "difference step must be positive, got {h}");
    let plus = family.m0(t + h);
    let minus = family.m0(t - h);
    let mid = family.m0(t);
    let d = sym_part(&((&plus - &minus) / (2.0 * h)));
    let second = spectral_norm(&(&plus - &mid * 2.0 + &minus)) / (h * h);
    let rounding = 1e-13 * spectral_norm(&mid).max(1.0) / h;
    let tol_fd = 10.0 * h * second + rounding;
    let norm = spectral_norm(&d);
    if norm > family.lip_m0() + tol_fd {
        return Err(Error::InconsistentLipschitz { claimed: family.lip_m0(), measured: norm });
    }
    Ok(d)
}

/// Outcome of [`check_conditions`]: measured constants and a verdict per condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionsReport {
    pub family: String,
    pub samples: usize,
    pub dim: usize,
    pub kernel_dim: usize,
    pub symmetry_defect: f64,
    pub lip_m0_claimed: f64,
    pub lip_m0_measured: f64,
    pub kernel_defect: f64,
    pub c0_claimed: f64,
    pub c0_measured: f64,
    pub c1_claimed: f64,
    pub c1_measured: f64,
    pub sup_m1_claimed: f64,
    pub sup_m1_measured: f64,
    pub a_selfadjoint: bool,
    pub a_lipschitz: bool,
    pub c_constant_kernel: bool,
    pub d_range: bool,
    pub d_kernel: bool,
    pub sup_m1_consistent: bool,
}

impl ConditionsReport {
    pub fn passed(&self) -> bool {
        self.a_selfadjoint
            && self.a_lipschitz
            && self.c_constant_kernel
            && self.d_range
            && self.d_kernel
            && self.sup_m1_consistent
    }

    /// Names of the failed checks.
    pub fn failures(&self) -> Vec<&'static str> {
        [
            (self.a_selfadjoint, "a_selfadjoint"),
            (self.a_lipschitz, "a_lipschitz"),
            (self.c_constant_kernel, "c_constant_kernel"),
            (self.d_range, "d_range"),
            (self.d_kernel, "d_kernel"),
            (self.sup_m1_consistent, "sup_m1_consistent"),
        ]
        .into_iter()
        .filter(|(ok, _)| !ok)
        .map(|(_, name)| name)
        .collect()
    }

    /// Flat `key = value` text block.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut num = |k: &str, v: f64| writeln!(s, "{k} = {}", format_full(v)).unwrap();
        num("conditions.symmetry_defect", self.symmetry_defect);
        num("conditions.lip_m0_claimed", self.lip_m0_claimed);
        num("conditions.lip_m0_measured", self.lip_m0_measured);
        num("conditions.kernel_defect", self.kernel_defect);
        num("conditions.c0_claimed", self.c0_claimed);
        num("conditions.c0_measured", self.c0_measured);
        num("conditions.c1_claimed", self.c1_claimed);
        num("conditions.c1_measured", self.c1_measured);
        num("conditions.sup_m1_claimed", self.sup_m1_claimed);
        num("conditions.sup_m1_measured", self.sup_m1_measured);
        let mut head = String::new();
        writeln!(head, "conditions.family = {}", self.family).unwrap();
        writeln!(head, "conditions.samples = {}", self.samples).unwrap();
        writeln!(head, "conditions.dim = {}", self.dim).unwrap();
        writeln!(head, "conditions.kernel_dim = {}", self.kernel_dim).unwrap();
        for (k, v) in [
            ("a_selfadjoint", self.a_selfadjoint),
            ("a_lipschitz", self.a_lipschitz),
            ("b_differentiable", true),
            ("c_constant_kernel", self.c_constant_kernel),
            ("d_range", self.d_range),
            ("d_kernel", self.d_kernel),
            ("sup_m1_consistent", self.sup_m1_consistent),
        ] {
            writeln!(s, "conditions.{k} = {v}").unwrap();
        }
        writeln!(s, "conditions.passed = {}", self.passed()).unwrap();
        head + &s
    }
}

/// Checks conditions (a), (c), (d) and the claimed constants on the given sample times.
///
/// Condition (b), differentiability off a null set, has no finite-sample analogue and is
/// reported as assumed.
pub fn check_conditions(family: &MaterialFamily, t_samples: &[f64]) -> ConditionsReport {
    let mut times: Vec<f64> = t_samples.iter().copied().filter(|t| t.is_finite()).collect();
    times.sort_by(|a, b| a.total_cmp(b));
    times.dedup();
    let k0 = family.kernel_basis();
    let k1 = family.range_basis();
    let claims = family.claims();

    let mut symmetry_defect: f64 = 0.0;
    let mut kernel_defect: f64 = 0.0;
    let mut c0_measured = f64::INFINITY;
    let mut c1_measured = f64::INFINITY;
    let mut sup_m1_measured: f64 = 0.0;
    let mut lip_m0_measured: f64 = 0.0;
    let mut nullity_stable = true;
    let mut prev: Option<(f64, DMatrix<f64>)> = None;

    for &t in &times {
        let m0 = family.m0(t);
        let m1 = family.m1(t);
        let scale = m0.amax().max(1.0);
        symmetry_defect = symmetry_defect.max(asymmetry(&m0) / scale);
        kernel_defect = kernel_defect.max((&m0 * k0).amax() / scale);
        match kernel_decompose(&sym_part(&m0), KERNEL_TOL) {
            Ok((k, _)) if k.ncols() == k0.ncols() => {}
            _ => nullity_stable = false,
        }
        c0_measured = c0_measured.min(min_sym_eig(&(k1.transpose() * &m0 * k1)));
        c1_measured = c1_measured.min(min_sym_eig(&(k0.transpose() * &m1 * k0)));
        sup_m1_measured = sup_m1_measured.max(spectral_norm(&m1));
        if let Some((tp, mp)) = &prev {
            lip_m0_measured = lip_m0_measured.max(spectral_norm(&(&m0 - mp)) / (t - tp));
        }
        prev = Some((t, m0));
    }

    let slack = |claim: f64| claim * (1.0 + 1e-6) + 1e-12;
    ConditionsReport {
        family: family.name().to_string(),
        samples: times.len(),
        dim: family.dim(),
        kernel_dim: k0.ncols(),
        symmetry_defect,
        lip_m0_claimed: claims.lip_m0,
        lip_m0_measured,
        kernel_defect,
        c0_claimed: claims.c0,
        c0_measured,
        c1_claimed: claims.c1,
        c1_measured,
        sup_m1_claimed: claims.sup_m1,
        sup_m1_measured,
        a_selfadjoint: symmetry_defect <= SYMMETRY_TOL,
        a_lipschitz: lip_m0_measured <= slack(claims.lip_m0),
        c_constant_kernel: kernel_defect <= KERNEL_DEFECT_TOL && nullity_stable,
        d_range: c0_measured >= claims.c0 * (1.0 - 1e-9) && claims.c0 > 0.0,
        d_kernel: k0.ncols() == 0 || (claims.c1 > 0.0 && c1_measured >= claims.c1 * (1.0 - 1e-9)),
        sup_m1_consistent: sup_m1_measured <= slack(claims.sup_m1),
    }
}

fn check_c_tilde(family: &MaterialFamily, c_tilde: f64) -> Result<()> {
    ensure!(
        c_tilde > 0.0 && c_tilde < family.c1(),
        "c_tilde must lie in (0, c1) = (0, {}), got {c_tilde}",
        family.c1()
    );
    Ok(())
}

/// `c̃ + ½|M₀|_Lip + |M₁|_∞ + |M₁|²_∞/(c₁ − c̃)`.
fn bracket(family: &MaterialFamily, c_tilde: f64) -> f64 {
    let sup = family.sup_m1();
    let coupling = if family.c1().is_infinite() || sup == 0.0 { 0.0 } else { sup * sup / (family.c1() - c_tilde) };
    c_tilde + 0.5 * family.lip_m0() + sup + coupling
}

/// Threshold weight `ρ₀ = (1/c₀)(c̃ + ½|M₀|_Lip + |M₁|_∞ + |M₁|²_∞/(c₁ − c̃))`.
pub fn rho_zero(family: &MaterialFamily, c_tilde: f64) -> Result<f64> {
    check_c_tilde(family, c_tilde)?;
    Ok(bracket(family, c_tilde) / family.c0())
}

/// Largest step with `min sym-eig(M₀/dt + M₁) ≥ c̃`: `c₀ / (c̃ + ½|M₀|_Lip + |M₁|_∞ + |M₁|²_∞/(c₁ − c̃))`.
pub fn dt_max(family: &MaterialFamily, c_tilde: f64) -> Result<f64> {
    check_c_tilde(family, c_tilde)?;
    Ok(family.c0() / bracket(family, c_tilde))
}

/// `S(t) = M₀(t)/dt + M₁(t)` with the smallest eigenvalue of its symmetric part.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOperator {
    pub matrix: DMatrix<f64>,
    pub min_sym_eig: f64,
}

pub fn step_operator(family: &MaterialFamily, t: f64, dt: f64) -> Result<StepOperator> {
    ensure!(dt > 0.0 && dt.is_finite(), "dt must be positive, got {dt}");
    let matrix = family.m0(t) / dt + family.m1(t);
    let m = min_sym_eig(&matrix);
    if !(m > 0.0) {
        let c_tilde = if family.c1().is_finite() { 0.5 * family.c1() } else { 0.5 * family.c0() };
        let suggested = if c_tilde > 0.0 { family.c0() / bracket(family, c_tilde) } else { f64::NAN };
        return Err(Error::DtTooLarge { dt, suggested });
    }
    Ok(StepOperator { matrix, min_sym_eig: m })
}

/// Both sides of the discrete monotonicity estimate on one signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityEstimate {
    /// `⟨(∂M₀ + M₁)u, u⟩_ρ` with the backward-difference product rule.
    pub lhs: f64,
    /// `(ρc₀ − ½lip − sup − sup²/ε)·‖ι₁*u‖² + (c₁ − ε)·‖ι₀*u‖²`.
    pub bound: f64,
    pub norm_sq: f64,
    /// Smallest `C` with `lhs ≥ bound − C·dt·‖u‖²`; zero when the bound already holds.
    pub c_needed: f64,
    /// `sup_k ‖M₀(t_k)‖` over the grid.
    pub m0_sup: f64,
}

/// Evaluates the discrete monotonicity estimate for `u` with weight `u.rho()` and split `ε`.
pub fn monotonicity_estimate(family: &MaterialFamily, u: &WeightedSignal, eps: f64) -> Result<MonotonicityEstimate> {
    ensure!(u.dim() == family.dim(), "signal dimension {} vs family {}", u.dim(), family.dim());
    ensure!(eps > 0.0, "epsilon must be positive");
    let grid = u.grid();
    let dt = grid.dt();
    let rho = u.rho();
    let k0 = family.kernel_basis();
    let k1 = family.range_basis();
    let mut lhs = 0.0;
    let mut range_sq = 0.0;
    let mut kernel_sq = 0.0;
    let mut norm_sq = 0.0;
    let mut m0_sup: f64 = 0.0;
    let mut prev_m0u = DVector::zeros(family.dim());
    for k in 0..u.len() {
        let t = grid.time(k);
        let w = grid.weight(k, rho) * dt;
        let uk = u.node(k).into_owned();
        let m0 = family.m0(t);
        m0_sup = m0_sup.max(spectral_norm(&m0));
        let m0u = &m0 * &uk;
        let op = (&m0u - &prev_m0u) / dt + family.m1(t) * &uk;
        lhs += w * op.dot(&uk);
        range_sq += w * (k1.transpose() * &uk).norm_squared();
        kernel_sq += w * (k0.transpose() * &uk).norm_squared();
        norm_sq += w * uk.norm_squared();
        prev_m0u = m0u;
    }
    let c = family.claims();
    // Without a kernel there is no cross term to split, so ε plays no role.
    let (coupling, kernel_coeff) = if k0.ncols() == 0 { (0.0, 0.0) } else { (c.sup_m1 * c.sup_m1 / eps, c.c1 - eps) };
    let range_coeff = rho * c.c0 - 0.5 * c.lip_m0 - c.sup_m1 - coupling;
    let bound = range_coeff * range_sq + kernel_coeff * kernel_sq;
    let c_needed = if norm_sq > 0.0 { ((bound - lhs) / (dt * norm_sq)).max(0.0) } else { 0.0 };
    Ok(MonotonicityEstimate { lhs, bound, norm_sq, c_needed, m0_sup })
}
