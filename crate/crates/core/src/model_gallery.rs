//! The thermoplastic and viscoplastic example systems on a one-dimensional slab.
//!
//! Fields depend on `x₁ ∈ (0, 1)` only. Each field is sampled on the same `m` indices;
//! scalar and vector gradients are forward differences with a zero value past the last
//! index, so `v` and `θ` carry a homogeneous Dirichlet condition at `x₁ = 1`. The
//! divergences are minus the transposes, which makes the spatial block exactly skew.
//!
//! State layouts are field-major: thermoplasticity `(v[3m], T[6m], θ[m], q[m])`,
//! viscoplasticity `(v[3m], w[Nm], T[6m])`. Symmetric 3×3 fields use the orthonormal
//! coordinates `[T₁₁, T₂₂, T₃₃, √2T₁₂, √2T₁₃, √2T₂₃]`.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{ensure, Error, Result};
use crate::linalg::{asymmetry, min_sym_eig, spectral_norm};
use crate::material_laws::{
    check_conditions, dt_max, rho_zero, Claims, ConditionsReport, MaterialFamily, ScalarCoefficient,
};
use crate::inclusion_solver::InclusionProblem;
use crate::monotone_relations::{
    deviatoric_basis, BallSaturation, BlockDiagonal, DeviatoricSaturation, MonotoneRelation, SoftThreshold,
    SplitRelation, SYM3_DIM,
};
use crate::weighted_space::{format_full, TimeGrid, WeightedSignal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabGrid {
    m: usize,
    dx: f64,
}

impl SlabGrid {
    /// `m` cells on the unit interval.
    pub fn new(m: usize) -> Result<Self> {
        ensure!(m >= 2, "slab needs at least 2 cells, got {m}");
        Ok(Self { m, dx: 1.0 / m as f64 })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }
}

#[derive(Debug, Clone)]
pub struct SpatialOperators {
    /// `m × m` scalar gradient.
    pub grad_c: CsrMatrix<f64>,
    /// `−grad_cᵀ`.
    pub div: CsrMatrix<f64>,
    /// `6m × 3m` symmetrized gradient of a displacement-type field.
    pub grad_sym: CsrMatrix<f64>,
    /// `−grad_symᵀ`.
    pub div_sym: CsrMatrix<f64>,
    /// `m × 6m` node-wise trace.
    pub trace_op: CsrMatrix<f64>,
}

fn negated_transpose(a: &CsrMatrix<f64>) -> CsrMatrix<f64> {
    let t = a.transpose();
    let mut coo = CooMatrix::new(t.nrows(), t.ncols());
    for (i, j, v) in t.triplet_iter() {
        coo.push(i, j, -*v);
    }
    CsrMatrix::from(&coo)
}

pub fn build_slab_operators(g: SlabGrid) -> SpatialOperators {
    let m = g.m;
    let inv = 1.0 / g.dx;
    let mut grad = CooMatrix::new(m, m);
    for i in 0..m {
        grad.push(i, i, -inv);
        if i + 1 < m {
            grad.push(i, i + 1, inv);
        }
    }
    let grad_c = CsrMatrix::from(&grad);

    // sym(∂₁v ⊗ e₁): (1,1) = ∂v₁, (1,2) = ∂v₂/2, (1,3) = ∂v₃/2
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut gs = CooMatrix::new(SYM3_DIM * m, 3 * m);
    for (row_comp, v_comp, scale) in [(0usize, 0usize, 1.0), (3, 1, s), (4, 2, s)] {
        for i in 0..m {
            gs.push(SYM3_DIM * i + row_comp, 3 * i + v_comp, -inv * scale);
            if i + 1 < m {
                gs.push(SYM3_DIM * i + row_comp, 3 * (i + 1) + v_comp, inv * scale);
            }
        }
    }
    let grad_sym = CsrMatrix::from(&gs);

    let mut tr = CooMatrix::new(m, SYM3_DIM * m);
    for i in 0..m {
        for c in 0..3 {
            tr.push(i, SYM3_DIM * i + c, 1.0);
        }
    }
    SpatialOperators {
        div: negated_transpose(&grad_c),
        div_sym: negated_transpose(&grad_sym),
        grad_c,
        grad_sym,
        trace_op: CsrMatrix::from(&tr),
    }
}

impl SpatialOperators {
    /// `max(|div + grad_cᵀ|, |Div + Gradᵀ|)` entry-wise.
    pub fn adjointness_defect(&self) -> f64 {
        let d = |a: &CsrMatrix<f64>, b: &CsrMatrix<f64>| (dense(a) + dense(b).transpose()).amax();
        d(&self.div, &self.grad_c).max(d(&self.div_sym, &self.grad_sym))
    }
}

pub fn dense(a: &CsrMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from(a)
}

/// Places `block` at `(r, c)` in `out`.
fn put(out: &mut DMatrix<f64>, r: usize, c: usize, block: &DMatrix<f64>) {
    out.view_mut((r, c), (block.nrows(), block.ncols())).copy_from(block);
}

fn check_positive(name: &str, c: &ScalarCoefficient) -> Result<()> {
    if !(c.inf() > 0.0) || !c.level.is_finite() {
        return Err(Error::Condition {
            condition: "d",
            detail: format!("coefficient {name} must be uniformly positive (lower bound {})", c.inf()),
        });
    }
    Ok(())
}

/// Lipschitz constant of `t ↦ 1/c(t)`.
fn reciprocal_lip(c: &ScalarCoefficient) -> f64 {
    c.lipschitz() / (c.inf() * c.inf())
}

/// Grid, weight and `c̃` for an assembled model. `None` picks `c̃ = c₁/2` (or `c₀/2`
/// when the kernel is trivial) and `ρ = max(ρ₀, 1)`.
#[derive(Debug, Clone, Copy)]
pub struct ModelSetup {
    pub grid: TimeGrid,
    pub c_tilde: Option<f64>,
    pub rho: Option<f64>,
}

/// An assembled model with its operators and condition check.
#[derive(Debug, Clone)]
pub struct GalleryModel {
    pub name: &'static str,
    pub slab: SlabGrid,
    pub operators: SpatialOperators,
    /// Skew spatial block of the relation.
    pub skew: DMatrix<f64>,
    pub problem: InclusionProblem,
    pub conditions: ConditionsReport,
    /// Offsets and lengths of the fields in the state vector.
    pub fields: Vec<(&'static str, usize, usize)>,
}

impl GalleryModel {
    pub fn dim(&self) -> usize {
        self.problem.family().dim()
    }

    pub fn skew_defect(&self) -> f64 {
        (&self.skew + self.skew.transpose()).amax()
    }

    pub fn field(&self, name: &str) -> Option<(usize, usize)> {
        self.fields.iter().find(|(n, _, _)| *n == name).map(|(_, o, l)| (*o, *l))
    }

    pub fn summary(&self) -> String {
        let fam = self.problem.family();
        let mut s = String::new();
        writeln!(s, "model.name = {}", self.name).unwrap();
        writeln!(s, "model.m = {}", self.slab.m()).unwrap();
        writeln!(s, "model.dx = {}", format_full(self.slab.dx())).unwrap();
        writeln!(s, "model.dim = {}", self.dim()).unwrap();
        for (n, o, l) in &self.fields {
            writeln!(s, "model.field.{n} = {o} {l}").unwrap();
        }
        writeln!(s, "model.kernel_dim = {}", fam.kernel_basis().ncols()).unwrap();
        let mut num = |k: &str, v: f64| writeln!(s, "model.{k} = {}", format_full(v)).unwrap();
        num("c0", fam.c0());
        num("c1", fam.c1());
        num("lip_m0", fam.lip_m0());
        num("sup_m1", fam.sup_m1());
        num("c_tilde", self.problem.c_tilde());
        num("rho", self.problem.rho());
        num("rho_zero", self.problem.rho_zero().unwrap_or(f64::NAN));
        num("dt_max", dt_max(fam, self.problem.c_tilde()).unwrap_or(f64::NAN));
        num("skew_defect", self.skew_defect());
        num("adjointness_defect", self.operators.adjointness_defect());
        s + &self.conditions.to_kv()
    }

    /// Replaces the forcing.
    pub fn with_forcing(mut self, forcing: WeightedSignal) -> Result<Self> {
        self.problem = self.problem.with_forcing(forcing)?;
        Ok(self)
    }
}

fn sample_times(grid: &TimeGrid) -> Vec<f64> {
    let n = 64.min(grid.len());
    (0..n).map(|i| grid.time(i * (grid.len() - 1) / (n - 1).max(1))).collect()
}

fn finish(
    name: &'static str,
    slab: SlabGrid,
    operators: SpatialOperators,
    skew: DMatrix<f64>,
    family: MaterialFamily,
    relation: Arc<dyn MonotoneRelation>,
    setup: ModelSetup,
    fields: Vec<(&'static str, usize, usize)>,
) -> Result<GalleryModel> {
    let conditions = check_conditions(&family, &sample_times(&setup.grid));
    if !conditions.passed() {
        return Err(Error::Condition {
            condition: "d",
            detail: format!("{name} coefficients fail: {}", conditions.failures().join(", ")),
        });
    }
    let c_tilde = setup
        .c_tilde
        .unwrap_or(if family.c1().is_finite() { 0.5 * family.c1() } else { 0.5 * family.c0() });
    let r0 = rho_zero(&family, c_tilde)?;
    let rho = setup.rho.unwrap_or(r0.max(1.0));
    let forcing = WeightedSignal::zeros(setup.grid, family.dim(), rho)?;
    let problem = InclusionProblem::new(family, relation, forcing, c_tilde)?;
    Ok(GalleryModel { name, slab, operators, skew, problem, conditions, fields })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoCoefficients {
    /// Mass density `M`.
    pub mass: ScalarCoefficient,
    /// Elasticity `C`, a multiple of the identity on Sym(3).
    pub elasticity: ScalarCoefficient,
    pub w: ScalarCoefficient,
    pub kappa: ScalarCoefficient,
    pub c: f64,
    pub tau0: f64,
    /// Saturation level of the plastic relation.
    pub s0: f64,
}

impl Default for ThermoCoefficients {
    fn default() -> Self {
        let one = ScalarCoefficient::constant(1.0);
        Self { mass: one, elasticity: one, w: one, kappa: one, c: 1.0, tau0: 1.0, s0: 1.0 }
    }
}

/// Per-index `(T, θ)` block: `[[a·I₆, a·c·e], [a·c·eᵀ, c·w/τ₀ + 3c²a]]`, `a = 1/C`, `e = trace*1`.
fn thermo_t_theta_block(a: f64, w: f64, c: f64, tau0: f64) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(SYM3_DIM + 1, SYM3_DIM + 1);
    for j in 0..SYM3_DIM {
        b[(j, j)] = a;
    }
    for j in 0..3 {
        b[(j, SYM3_DIM)] = a * c;
        b[(SYM3_DIM, j)] = a * c;
    }
    b[(SYM3_DIM, SYM3_DIM)] = c * w / tau0 + 3.0 * c * c * a;
    b
}

pub fn build_thermoplasticity(g: SlabGrid, coeffs: ThermoCoefficients, setup: ModelSetup) -> Result<GalleryModel> {
    for (n, c) in [("M", &coeffs.mass), ("C", &coeffs.elasticity), ("w", &coeffs.w), ("kappa", &coeffs.kappa)] {
        check_positive(n, c)?;
    }
    ensure!(coeffs.c > 0.0 && coeffs.tau0 > 0.0 && coeffs.s0 > 0.0, "c, tau0 and s0 must be positive");
    let m = g.m();
    let ops = build_slab_operators(g);
    let (ov, ot, oth, oq) = (0, 3 * m, 9 * m, 10 * m);
    let dim = 11 * m;
    let fields = vec![("v", ov, 3 * m), ("T", ot, 6 * m), ("theta", oth, m), ("q", oq, m)];

    let ThermoCoefficients { mass, elasticity, w, kappa, c, tau0, s0 } = coeffs;
    let m0 = move |t: f64| {
        let mut out = DMatrix::zeros(dim, dim);
        let mv = mass.at(t);
        let blk = thermo_t_theta_block(1.0 / elasticity.at(t), w.at(t), c, tau0);
        for i in 0..m {
            for d in 0..3 {
                out[(ov + 3 * i + d, ov + 3 * i + d)] = mv;
            }
            let idx: Vec<usize> = (0..SYM3_DIM).map(|j| ot + SYM3_DIM * i + j).chain([oth + i]).collect();
            for (a, &r) in idx.iter().enumerate() {
                for (b, &cc) in idx.iter().enumerate() {
                    out[(r, cc)] = blk[(a, b)];
                }
            }
        }
        out
    };
    let m1 = move |t: f64| {
        let mut out = DMatrix::zeros(dim, dim);
        let val = tau0 / (c * kappa.at(t));
        for i in 0..m {
            out[(oq + i, oq + i)] = val;
        }
        out
    };

    let a_inf = 1.0 / elasticity.sup();
    let c0 = mass.inf().min(min_sym_eig(&thermo_t_theta_block(a_inf, w.inf(), c, tau0)));
    let shape = spectral_norm(&thermo_t_theta_block(1.0, 0.0, c, 1.0));
    let claims = Claims {
        lip_m0: mass.lipschitz().max(reciprocal_lip(&elasticity) * shape + c * w.lipschitz() / tau0),
        sup_m1: tau0 / (c * kappa.inf()),
        c0,
        c1: tau0 / (c * kappa.sup()),
    };
    let mut kernel = DMatrix::zeros(dim, m);
    for i in 0..m {
        kernel[(oq + i, i)] = 1.0;
    }
    let family = MaterialFamily::new("thermoplasticity", dim, Arc::new(m0), Arc::new(m1), claims, kernel)?;

    let grad = dense(&ops.grad_c);
    let grad_sym = dense(&ops.grad_sym);
    let mut skew = DMatrix::zeros(dim, dim);
    put(&mut skew, ov, ot, &grad_sym.transpose());
    put(&mut skew, ot, ov, &(-&grad_sym));
    put(&mut skew, oth, oq, &grad.transpose());
    put(&mut skew, oq, oth, &(-&grad));

    let sat: Arc<dyn MonotoneRelation> = Arc::new(DeviatoricSaturation::new(s0)?);
    let blocks = (0..m).map(|i| ((ot + SYM3_DIM * i..ot + SYM3_DIM * (i + 1)).collect(), sat.clone())).collect();
    let relation = SplitRelation::new(skew.clone(), BlockDiagonal::new(dim, blocks)?)?;
    finish("thermoplasticity", g, ops, skew, family, Arc::new(relation), setup, fields)
}

#[derive(Debug, Clone, PartialEq)]
pub enum GLaw {
    /// Subdifferential of `r‖·‖`.
    SoftThreshold { r: f64 },
    /// Projection onto the ball of radius `s`.
    BallSaturation { s: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViscoCoefficients {
    pub mass: ScalarCoefficient,
    /// Compliance-type coefficient `D`, a multiple of the identity on Sym(3).
    pub d: ScalarCoefficient,
    /// Hardening coefficient `L`, a multiple of the identity on `ℝᴺ`.
    pub l: ScalarCoefficient,
    /// `B : ℝᴺ → Sym(3)` as a `6 × N` matrix.
    pub b: DMatrix<f64>,
    pub g: GLaw,
}

impl Default for ViscoCoefficients {
    fn default() -> Self {
        let one = ScalarCoefficient::constant(1.0);
        Self { mass: one, d: one, l: one, b: deviatoric_basis(), g: GLaw::SoftThreshold { r: 1.0 } }
    }
}

/// `[[L⁻¹·I, −L⁻¹Bᵀ], [−BL⁻¹, D⁻¹·I + BL⁻¹Bᵀ]]` for one index.
fn visco_w_t_block(l_inv: f64, d_inv: f64, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.ncols();
    let mut out = DMatrix::zeros(n + SYM3_DIM, n + SYM3_DIM);
    put(&mut out, 0, 0, &(DMatrix::identity(n, n) * l_inv));
    put(&mut out, 0, n, &(b.transpose() * -l_inv));
    put(&mut out, n, 0, &(b * -l_inv));
    put(&mut out, n, n, &(DMatrix::identity(SYM3_DIM, SYM3_DIM) * d_inv + b * b.transpose() * l_inv));
    out
}

/// `M₀(t)` of the viscoplastic model without any positivity check.
pub fn viscoplastic_m0(g: SlabGrid, coeffs: &ViscoCoefficients, t: f64) -> DMatrix<f64> {
    let m = g.m();
    let n = coeffs.b.ncols();
    let (ow, ot) = (3 * m, 3 * m + n * m);
    let dim = (3 + n + SYM3_DIM) * m;
    let mut out = DMatrix::zeros(dim, dim);
    let blk = visco_w_t_block(1.0 / coeffs.l.at(t), 1.0 / coeffs.d.at(t), &coeffs.b);
    let mv = coeffs.mass.at(t);
    for i in 0..m {
        for d in 0..3 {
            out[(3 * i + d, 3 * i + d)] = mv;
        }
        let idx: Vec<usize> = (0..n).map(|j| ow + n * i + j).chain((0..SYM3_DIM).map(|j| ot + SYM3_DIM * i + j)).collect();
        for (a, &r) in idx.iter().enumerate() {
            for (bb, &cc) in idx.iter().enumerate() {
                out[(r, cc)] = blk[(a, bb)];
            }
        }
    }
    out
}

pub fn build_viscoplasticity(g: SlabGrid, coeffs: ViscoCoefficients, setup: ModelSetup) -> Result<GalleryModel> {
    ensure!(coeffs.b.nrows() == SYM3_DIM && coeffs.b.ncols() > 0, "B must be 6 × N with N ≥ 1");
    check_positive("M", &coeffs.mass)?;
    // The Gauß step shows M₀ ≻ 0 iff diag(L⁻¹, D⁻¹) ≻ 0.
    check_positive("D", &coeffs.d)?;
    check_positive("L", &coeffs.l)?;
    let m = g.m();
    let n = coeffs.b.ncols();
    let ops = build_slab_operators(g);
    let (ov, ow, ot) = (0, 3 * m, 3 * m + n * m);
    let dim = (3 + n + SYM3_DIM) * m;
    let fields = vec![("v", ov, 3 * m), ("w", ow, n * m), ("T", ot, SYM3_DIM * m)];

    let b = &coeffs.b;
    let mut p_inv = DMatrix::identity(n + SYM3_DIM, n + SYM3_DIM);
    put(&mut p_inv, 0, n, &b.transpose());
    let gauss = spectral_norm(&p_inv).powi(2);
    let l_inf = 1.0 / coeffs.l.sup();
    let d_inf = 1.0 / coeffs.d.sup();
    let shape = spectral_norm(&visco_w_t_block(1.0, 0.0, b));
    let claims = Claims {
        lip_m0: coeffs
            .mass
            .lipschitz()
            .max(reciprocal_lip(&coeffs.l) * shape + reciprocal_lip(&coeffs.d)),
        sup_m1: 0.0,
        c0: coeffs.mass.inf().min(l_inf.min(d_inf) / gauss),
        c1: f64::INFINITY,
    };
    let c2 = coeffs.clone();
    let m0 = move |t: f64| viscoplastic_m0(g, &c2, t);
    let m1 = move |_t: f64| DMatrix::zeros(dim, dim);
    let family =
        MaterialFamily::new("viscoplasticity", dim, Arc::new(m0), Arc::new(m1), claims, DMatrix::zeros(dim, 0))?;

    let grad_sym = dense(&ops.grad_sym);
    let mut skew = DMatrix::zeros(dim, dim);
    put(&mut skew, ov, ot, &grad_sym.transpose());
    put(&mut skew, ot, ov, &(-&grad_sym));

    let law: Arc<dyn MonotoneRelation> = match coeffs.g {
        GLaw::SoftThreshold { r } => Arc::new(SoftThreshold::new(n, r)?),
        GLaw::BallSaturation { s } => Arc::new(BallSaturation::new(n, s)?),
    };
    let blocks = (0..m).map(|i| ((ow + n * i..ow + n * (i + 1)).collect(), law.clone())).collect();
    let relation = SplitRelation::new(skew.clone(), BlockDiagonal::new(dim, blocks)?)?;
    finish("viscoplasticity", g, ops, skew, family, Arc::new(relation), setup, fields)
}

/// Largest `|trace|` of the plastic relation's output over the given `T` inputs.
pub fn deviatoric_trace_defect(s0: f64, inputs: &[DVector<f64>]) -> Result<f64> {
    let rel = DeviatoricSaturation::new(s0)?;
    Ok(inputs
        .iter()
        .map(|t| {
            let out = rel.apply(t);
            (out[0] + out[1] + out[2]).abs()
        })
        .fold(0.0, f64::max))
}

/// Whether the symmetric matrix is positive definite, by its smallest eigenvalue.
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    asymmetry(m) <= 1e-12 * m.amax().max(1.0) && min_sym_eig(m) > 0.0
}
