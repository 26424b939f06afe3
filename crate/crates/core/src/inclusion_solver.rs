//! Causal implicit stepping for `(u, f) ∈ ∂₀,ρ M₀(t) + M₁(t) + A_ρ`.
//!
//! Each step solves the stationary inclusion `S u_k + A(u_k) ∋ b_k` with
//! `S = M₀(t_k)/dt + M₁(t_k)` and `b_k = f_k + M₀(t_{k−1}) u_{k−1}/dt`, starting from a zero
//! past. The weight `ρ` is used for admission and norms only, never in the stencil.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{ensure, Error, Result};
use crate::material_laws::{dt_max, rho_zero, step_operator, MaterialFamily};
use crate::monotone_relations::{
    forward_backward, resolvent_split, solve_split, FbOptions, MonotoneRelation, Structure, YosidaRelation,
};
use crate::time_calculus::derivative;
use crate::weighted_space::{format_full, weighted_norm, WeightedSignal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Direct,
    YosidaPath,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Direct => "direct",
            Mode::YosidaPath => "yosida",
        }
    }
}

/// Geometric schedule `1, ½, ¼, …` down to `lambda_min`, which always closes the list.
pub fn geometric_schedule(start: f64, lambda_min: f64, factor: f64) -> Result<Vec<f64>> {
    ensure!(start > 0.0 && lambda_min > 0.0 && lambda_min <= start, "schedule bounds must satisfy 0 < min ≤ start");
    ensure!(factor > 0.0 && factor < 1.0, "schedule factor must lie in (0, 1)");
    let mut out = Vec::new();
    let mut l = start;
    while l > lambda_min {
        out.push(l);
        l *= factor;
    }
    out.push(lambda_min);
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct InclusionProblem {
    family: MaterialFamily,
    relation: Arc<dyn MonotoneRelation>,
    forcing: WeightedSignal,
    rho: f64,
    c_tilde: f64,
    mode: Mode,
    lambda_schedule: Vec<f64>,
    fp_tol: f64,
    fp_max_iter: usize,
}

impl InclusionProblem {
    /// Problem with weight taken from the forcing, direct mode, `fp_tol = 1e−10`.
    pub fn new(
        family: MaterialFamily,
        relation: Arc<dyn MonotoneRelation>,
        forcing: WeightedSignal,
        c_tilde: f64,
    ) -> Result<Self> {
        ensure!(relation.contains_origin(), "relation {} must contain (0, 0)", relation.name());
        ensure!(
            relation.dim() == family.dim() && forcing.dim() == family.dim(),
            "dimension mismatch: family {}, relation {}, forcing {}",
            family.dim(),
            relation.dim(),
            forcing.dim()
        );
        ensure!(
            c_tilde > 0.0 && c_tilde < family.c1(),
            "c_tilde must lie in (0, c1) = (0, {}), got {c_tilde}",
            family.c1()
        );
        let rho = forcing.rho();
        Ok(Self {
            family,
            relation,
            forcing,
            rho,
            c_tilde,
            mode: Mode::Direct,
            lambda_schedule: geometric_schedule(1.0, 1e-6, 0.5)?,
            fp_tol: 1e-10,
            fp_max_iter: 100_000,
        })
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        self.forcing = self.forcing.with_rho(rho)?;
        self.rho = rho;
        Ok(self)
    }

    pub fn with_forcing(mut self, forcing: WeightedSignal) -> Result<Self> {
        ensure!(forcing.dim() == self.family.dim(), "forcing dimension {} vs {}", forcing.dim(), self.family.dim());
        self.forcing = forcing.with_rho(self.rho)?;
        Ok(self)
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_schedule(mut self, schedule: Vec<f64>) -> Result<Self> {
        ensure!(!schedule.is_empty(), "lambda schedule must be nonempty");
        ensure!(schedule.iter().all(|l| *l > 0.0 && l.is_finite()), "lambda schedule must be positive");
        ensure!(schedule.windows(2).all(|w| w[1] < w[0]), "lambda schedule must be strictly decreasing");
        self.lambda_schedule = schedule;
        Ok(self)
    }

    pub fn with_fp(mut self, tol: f64, max_iter: usize) -> Result<Self> {
        ensure!(tol > 0.0 && max_iter > 0, "fixed-point tolerance and iteration cap must be positive");
        self.fp_tol = tol;
        self.fp_max_iter = max_iter;
        Ok(self)
    }

    pub fn with_relation(mut self, relation: Arc<dyn MonotoneRelation>) -> Result<Self> {
        ensure!(relation.contains_origin(), "relation {} must contain (0, 0)", relation.name());
        ensure!(relation.dim() == self.family.dim(), "relation dimension mismatch");
        self.relation = relation;
        Ok(self)
    }

    pub fn family(&self) -> &MaterialFamily {
        &self.family
    }

    pub fn relation(&self) -> &Arc<dyn MonotoneRelation> {
        &self.relation
    }

    pub fn forcing(&self) -> &WeightedSignal {
        &self.forcing
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn c_tilde(&self) -> f64 {
        self.c_tilde
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn lambda_schedule(&self) -> &[f64] {
        &self.lambda_schedule
    }

    pub fn fp_tol(&self) -> f64 {
        self.fp_tol
    }

    pub fn fp_max_iter(&self) -> usize {
        self.fp_max_iter
    }

    pub fn dt(&self) -> f64 {
        self.forcing.grid().dt()
    }

    pub fn rho_zero(&self) -> Result<f64> {
        rho_zero(&self.family, self.c_tilde)
    }

    /// Relative slack `20·dt·(ρ + |M₀|_Lip + |M₁|_∞)` on the `1/c̃` bounds.
    pub fn tol_dt(&self) -> f64 {
        20.0 * self.dt() * (self.rho + self.family.lip_m0() + self.family.sup_m1())
    }

    /// Regularization shift `δ = 2(|M₁|_∞ + |M₀|_Lip) + 1` of the Yosida path.
    pub fn delta(&self) -> f64 {
        2.0 * (self.family.sup_m1() + self.family.lip_m0()) + 1.0
    }

    fn fb_options(&self) -> FbOptions {
        FbOptions { tol: self.fp_tol, max_iter: self.fp_max_iter }
    }

    /// Rejects `ρ < ρ₀`.
    pub fn validate(&self) -> Result<()> {
        let r0 = self.rho_zero()?;
        if self.rho < r0 {
            return Err(Error::RhoBelowThreshold { rho: self.rho, rho_zero: r0 });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `S u + A(u) ∋ f_k + prev_m0u/dt` at time `t`, where `prev_m0u = M₀(t_{k−1}) u_{k−1}`.
///
/// Linear relations are folded into `S` and solved exactly. Split relations are folded
/// the same way for their linear part, and their untouched coordinates are eliminated
/// before forward–backward runs on the rest. `warm` seeds the iteration.
#[allow(clippy::too_many_arguments)]
pub fn solve_step(
    family: &MaterialFamily,
    relation: &dyn MonotoneRelation,
    t: f64,
    dt: f64,
    prev_m0u: &DVector<f64>,
    f_k: &DVector<f64>,
    warm: Option<&DVector<f64>>,
    opts: FbOptions,
) -> Result<StepOutcome> {
    let s = step_operator(family, t, dt)?.matrix;
    let b = f_k + prev_m0u / dt;
    match relation.structure() {
        Structure::Linear(p) => {
            let full = s + p;
            let x = full.clone().lu().solve(&b).ok_or_else(|| Error::Resolvent {
                reason: "singular step matrix".into(),
                residual: f64::NAN,
            })?;
            let residual = (&full * &x - &b).norm() / b.norm().max(1.0);
            Ok(StepOutcome { x, iterations: 1, residual })
        }
        Structure::Split { linear, nonlinear } => {
            let out = solve_split(&(s + linear), nonlinear, &b, warm, opts)?;
            Ok(StepOutcome { x: out.x, iterations: out.iterations, residual: out.residual })
        }
        Structure::Opaque => {
            let out = forward_backward(&s, relation, &b, warm, opts)?;
            Ok(StepOutcome { x: out.x, iterations: out.iterations, residual: out.residual })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Converged,
    Failed { step: usize, reason: String },
}

/// One stage of the Yosida path.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaStage {
    pub lambda: f64,
    /// `‖A_λ(u_λ)‖_ρ`.
    pub yosida_norm: f64,
    pub iterations: usize,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: WeightedSignal,
    pub per_step_iterations: Vec<usize>,
    pub max_residual: f64,
    pub lambda_trace: Vec<LambdaStage>,
    /// `sup_λ ‖A_λ(u_λ)‖_ρ` over the schedule; zero in direct mode.
    pub yosida_sup_norm: f64,
    /// `(1 + δ/c̃)‖f‖_ρ + (1/c̃)|M₀|_∞‖∂f‖_ρ`, reported next to the observed sup in Yosida mode.
    pub yosida_bound: f64,
    pub status: Status,
    pub mode: Mode,
    pub rho: f64,
    pub rho_zero: f64,
    pub c_tilde: f64,
    pub dt_max: f64,
}

impl SolveReport {
    pub fn is_converged(&self) -> bool {
        self.status == Status::Converged
    }

    /// Converts a failed status into an error.
    pub fn into_result(self) -> Result<Self> {
        match &self.status {
            Status::Converged => Ok(self),
            Status::Failed { step, reason } => Err(Error::StepFailure { step: *step, reason: reason.clone() }),
        }
    }

    pub fn total_iterations(&self) -> usize {
        self.per_step_iterations.iter().sum()
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut num = |k: &str, v: f64| writeln!(s, "{k} = {}", format_full(v)).unwrap();
        num("solve.rho", self.rho);
        num("solve.rho_zero", self.rho_zero);
        num("solve.c_tilde", self.c_tilde);
        num("solve.dt", self.solution.grid().dt());
        num("solve.dt_max", self.dt_max);
        num("solve.max_residual", self.max_residual);
        num("solve.solution_norm", weighted_norm(&self.solution));
        num("solve.solution_sup", self.solution.sup_norm());
        num("solve.yosida_sup_norm", self.yosida_sup_norm);
        num("solve.yosida_bound", self.yosida_bound);
        let mut head = String::new();
        writeln!(head, "solve.mode = {}", self.mode.as_str()).unwrap();
        match &self.status {
            Status::Converged => writeln!(head, "solve.status = converged").unwrap(),
            Status::Failed { step, reason } => {
                writeln!(head, "solve.status = failed").unwrap();
                writeln!(head, "solve.failed_step = {step}").unwrap();
                writeln!(head, "solve.failure = {reason}").unwrap();
            }
        }
        writeln!(head, "solve.steps = {}", self.solution.len()).unwrap();
        writeln!(head, "solve.dim = {}", self.solution.dim()).unwrap();
        writeln!(head, "solve.total_iterations = {}", self.total_iterations()).unwrap();
        writeln!(
            head,
            "solve.max_step_iterations = {}",
            self.per_step_iterations.iter().copied().max().unwrap_or(0)
        )
        .unwrap();
        let mut tail = String::new();
        writeln!(tail, "solve.lambda_stages = {}", self.lambda_trace.len()).unwrap();
        for (i, st) in self.lambda_trace.iter().enumerate() {
            writeln!(
                tail,
                "solve.lambda.{i} = {} {} {}",
                format_full(st.lambda),
                format_full(st.yosida_norm),
                st.iterations
            )
            .unwrap();
        }
        head + &s + &tail
    }
}

struct March {
    solution: WeightedSignal,
    iterations: Vec<usize>,
    max_residual: f64,
    failure: Option<(usize, String)>,
}

fn march(problem: &InclusionProblem, relation: &dyn MonotoneRelation, warm: Option<&WeightedSignal>) -> March {
    let family = &problem.family;
    let f = &problem.forcing;
    let grid = *f.grid();
    let dt = grid.dt();
    let mut solution = WeightedSignal::zeros(grid, f.dim(), problem.rho).expect("valid shape");
    let mut iterations = Vec::with_capacity(grid.len());
    let mut max_residual: f64 = 0.0;
    let mut prev = DVector::zeros(f.dim());
    let mut prev_m0u = DVector::zeros(f.dim());
    for k in 0..grid.len() {
        let t = grid.time(k);
        let guess = match warm {
            Some(w) => w.node(k).into_owned(),
            None => prev.clone(),
        };
        let fk = f.node(k).into_owned();
        match solve_step(family, relation, t, dt, &prev_m0u, &fk, Some(&guess), problem.fb_options()) {
            Ok(out) => {
                iterations.push(out.iterations);
                max_residual = max_residual.max(out.residual);
                prev_m0u = family.m0(t) * &out.x;
                solution.set_node(k, &out.x);
                prev = out.x;
            }
            Err(e) => {
                return March { solution, iterations, max_residual, failure: Some((k, e.to_string())) };
            }
        }
    }
    March { solution, iterations, max_residual, failure: None }
}

/// Node-wise `A_λ(u)` and its weighted norm.
fn yosida_norm(relation: &dyn MonotoneRelation, lambda: f64, u: &WeightedSignal) -> Result<f64> {
    let mut v = u.clone();
    for k in 0..u.len() {
        let (_, a) = resolvent_split(relation, lambda, &u.node(k).into_owned())?;
        v.set_node(k, &a);
    }
    Ok(weighted_norm(&v))
}

/// Marches the problem in time. Admission failures (`ρ < ρ₀`, bad `c̃`) are errors; step
/// failures are reported through [`Status::Failed`] with the partial solution.
pub fn solve(problem: &InclusionProblem) -> Result<SolveReport> {
    problem.validate()?;
    let rho_zero = problem.rho_zero()?;
    let dt_max = dt_max(&problem.family, problem.c_tilde)?;
    let mut report = SolveReport {
        solution: WeightedSignal::zeros(*problem.forcing.grid(), problem.forcing.dim(), problem.rho)?,
        per_step_iterations: Vec::new(),
        max_residual: 0.0,
        lambda_trace: Vec::new(),
        yosida_sup_norm: 0.0,
        yosida_bound: 0.0,
        status: Status::Converged,
        mode: problem.mode,
        rho: problem.rho,
        rho_zero,
        c_tilde: problem.c_tilde,
        dt_max,
    };
    match problem.mode {
        Mode::Direct => {
            let m = march(problem, problem.relation.as_ref(), None);
            report.solution = m.solution;
            report.per_step_iterations = m.iterations;
            report.max_residual = m.max_residual;
            if let Some((step, reason)) = m.failure {
                report.status = Status::Failed { step, reason };
            }
        }
        Mode::YosidaPath => {
            let grid = problem.forcing.grid();
            let m0_sup = grid.times().map(|t| crate::linalg::spectral_norm(&problem.family.m0(t))).fold(0.0, f64::max);
            let c = problem.c_tilde;
            report.yosida_bound = (1.0 + problem.delta() / c) * weighted_norm(&problem.forcing)
                + m0_sup / c * weighted_norm(&derivative(&problem.forcing));
            let mut warm: Option<WeightedSignal> = None;
            for &lambda in &problem.lambda_schedule {
                let a_lambda = YosidaRelation::new(problem.relation.clone(), lambda)?;
                let m = march(problem, &a_lambda, warm.as_ref());
                report.max_residual = report.max_residual.max(m.max_residual);
                let stage_iters: usize = m.iterations.iter().sum();
                if let Some((step, reason)) = m.failure {
                    report.solution = m.solution;
                    report.per_step_iterations = m.iterations;
                    report.status = Status::Failed { step, reason: format!("lambda = {lambda}: {reason}") };
                    return Ok(report);
                }
                let yn = yosida_norm(problem.relation.as_ref(), lambda, &m.solution)?;
                report.yosida_sup_norm = report.yosida_sup_norm.max(yn);
                report.lambda_trace.push(LambdaStage {
                    lambda,
                    yosida_norm: yn,
                    iterations: stage_iters,
                    max_residual: m.max_residual,
                });
                report.per_step_iterations = m.iterations;
                warm = Some(m.solution);
            }
            report.solution = warm.expect("schedule is nonempty");
        }
    }
    Ok(report)
}

/// `‖u_f − u_g‖_ρ / ‖f − g‖_ρ`, with `0/0` read as `0`.
pub fn lipschitz_certificate(problem: &InclusionProblem, g: &WeightedSignal) -> Result<f64> {
    ensure!(g.grid() == problem.forcing.grid(), "second forcing must live on the problem grid");
    let other = problem.clone().with_forcing(g.clone())?;
    let uf = solve(problem)?.into_result()?.solution;
    let ug = solve(&other)?.into_result()?.solution;
    let num = weighted_norm(&uf.try_sub(&ug)?);
    let den = weighted_norm(&problem.forcing.try_sub(other.forcing())?);
    if den == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(num / den)
}
