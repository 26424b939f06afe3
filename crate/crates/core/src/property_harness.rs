//! Randomized verification campaigns and an independent trajectory oracle.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{ensure, Error, Result};
use crate::inclusion_solver::{lipschitz_certificate, solve, InclusionProblem, Mode};
use crate::material_laws::monotonicity_estimate;
use crate::monotone_relations::{Branch, LipschitzMap, ScalarLaw, Structure};
use crate::weighted_space::{format_full, weighted_norm, TimeGrid, WeightedSignal};

/// Node-wise standard normal values, scaled to unit weighted norm.
pub fn random_forcing(grid: TimeGrid, dim: usize, rho: f64, rng: &mut impl Rng) -> Result<WeightedSignal> {
    let raw = WeightedSignal::from_fn(grid, dim, rho, |_| DVector::from_fn(dim, |_, _| rng.sample(StandardNormal)))?;
    let n = weighted_norm(&raw);
    Ok(if n > 0.0 { raw.scaled(1.0 / n) } else { raw })
}

/// Random low-frequency modes `Σ aⱼ sin(ωⱼt + φⱼ)` per coordinate, tapered to vanish at both
/// ends of the grid and scaled to unit weighted norm.
pub fn random_smooth_signal(problem: &InclusionProblem, rng: &mut impl Rng) -> Result<WeightedSignal> {
    let f = problem.forcing();
    let grid = *f.grid();
    let dim = f.dim();
    let (t0, t1) = (grid.t0(), grid.last_time());
    let modes: Vec<[f64; 3]> = (0..3 * dim)
        .map(|_| [rng.sample(StandardNormal), rng.gen_range(0.0..2.0), rng.gen_range(0.0..std::f64::consts::TAU)])
        .collect();
    let raw = WeightedSignal::from_fn(grid, dim, problem.rho(), |t| {
        let taper = if t1 > t0 { (std::f64::consts::PI * (t - t0) / (t1 - t0)).sin() } else { 1.0 };
        DVector::from_fn(dim, |i, _| {
            modes[3 * i..3 * i + 3].iter().map(|[a, w, p]| a * (w * (t - t0) + p).sin()).sum::<f64>() * taper
        })
    })?;
    let n = weighted_norm(&raw);
    Ok(if n > 0.0 { raw.scaled(1.0 / n) } else { raw })
}

/// Seed of trial `index` in a campaign seeded with `seed`.
pub fn trial_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Check {
    Causality,
    Lipschitz,
    MonotonicityBound,
    RhoIndependence,
    YosidaAgreement,
    OracleMatch,
}

impl Check {
    pub const ALL: [Check; 6] = [
        Check::Causality,
        Check::Lipschitz,
        Check::MonotonicityBound,
        Check::RhoIndependence,
        Check::YosidaAgreement,
        Check::OracleMatch,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Check::Causality => "causality",
            Check::Lipschitz => "lipschitz",
            Check::MonotonicityBound => "monotonicity_bound",
            Check::RhoIndependence => "rho_independence",
            Check::YosidaAgreement => "yosida_agreement",
            Check::OracleMatch => "oracle_match",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Check::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown check '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Multiplier on `(ρ² + |M₀|_Lip)·sup‖M₀‖` bounding the measured dt-correction.
    pub monotonicity_factor: f64,
    /// Factor on the problem's `fp_tol` for oracle and Yosida agreement.
    pub fp_factor: f64,
    /// Factor on the smallest `λ` for Yosida agreement.
    pub lambda_factor: f64,
    /// Largest allowed ratio of successive `‖A_λ(u_λ)‖_ρ`.
    pub yosida_growth: f64,
    /// Ratio between the two weights compared by the ρ-independence check.
    pub rho_factor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { monotonicity_factor: 10.0, fp_factor: 10.0, lambda_factor: 5.0, yosida_growth: 2.0, rho_factor: 2.0 }
    }
}

#[derive(Debug, Clone)]
pub struct PropertyCampaign {
    pub name: String,
    pub template: InclusionProblem,
    pub trials: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub tolerances: Tolerances,
}

impl PropertyCampaign {
    pub fn new(name: impl Into<String>, template: InclusionProblem, trials: usize, seed: u64, checks: Vec<Check>) -> Self {
        Self { name: name.into(), template, trials, seed, checks, tolerances: Tolerances::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub check: Check,
    pub trial: usize,
    pub seed: u64,
    pub passed: bool,
    /// Observed quantity (ratio, discrepancy, measured constant).
    pub value: f64,
    /// Threshold it is compared against.
    pub limit: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckSummary {
    pub check: Check,
    pub trials: usize,
    pub passed: usize,
    /// Largest `value / limit` seen (∞ for solver failures).
    pub worst_margin: f64,
    pub failing_seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignReport {
    pub name: String,
    pub seed: u64,
    pub records: Vec<TrialRecord>,
}

impl CampaignReport {
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.passed).count()
    }

    pub fn summaries(&self) -> Vec<CheckSummary> {
        let mut checks: Vec<Check> = self.records.iter().map(|r| r.check).collect();
        checks.sort();
        checks.dedup();
        checks
            .into_iter()
            .map(|check| {
                let recs: Vec<&TrialRecord> = self.records.iter().filter(|r| r.check == check).collect();
                let worst_margin = recs
                    .iter()
                    .map(|r| if r.value.is_nan() { f64::INFINITY } else if r.limit > 0.0 { r.value / r.limit } else if r.value > 0.0 { f64::INFINITY } else { 0.0 })
                    .fold(0.0, f64::max);
                CheckSummary {
                    check,
                    trials: recs.len(),
                    passed: recs.iter().filter(|r| r.passed).count(),
                    worst_margin,
                    failing_seeds: recs.iter().filter(|r| !r.passed).map(|r| r.seed).collect(),
                }
            })
            .collect()
    }

    /// One row per trial per check.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,trial,seed,passed,value,limit,detail\n");
        for r in &self.records {
            writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.check.as_str(),
                r.trial,
                r.seed,
                r.passed,
                format_full(r.value),
                format_full(r.limit),
                r.detail.replace([',', '\n'], ";")
            )
            .unwrap();
        }
        s
    }

    pub fn summary_kv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "campaign.name = {}", self.name).unwrap();
        writeln!(s, "campaign.seed = {}", self.seed).unwrap();
        writeln!(s, "campaign.records = {}", self.records.len()).unwrap();
        writeln!(s, "campaign.failures = {}", self.failures()).unwrap();
        for c in self.summaries() {
            let k = c.check.as_str();
            writeln!(s, "campaign.{k}.trials = {}", c.trials).unwrap();
            writeln!(s, "campaign.{k}.passed = {}", c.passed).unwrap();
            writeln!(s, "campaign.{k}.worst_margin = {}", format_full(c.worst_margin)).unwrap();
            let seeds: Vec<String> = c.failing_seeds.iter().map(u64::to_string).collect();
            writeln!(s, "campaign.{k}.failing_seeds = {}", seeds.join(" ")).unwrap();
        }
        writeln!(s, "campaign.passed = {}", self.passed()).unwrap();
        s
    }
}

/// Runs every selected check over `trials` seeded instances, in parallel.
pub fn run_campaign(c: &PropertyCampaign) -> CampaignReport {
    let jobs: Vec<(Check, usize)> =
        c.checks.iter().flat_map(|&check| (0..c.trials).map(move |i| (check, i))).collect();
    let mut records: Vec<TrialRecord> = jobs
        .into_par_iter()
        .map(|(check, trial)| {
            let seed = trial_seed(c.seed, trial);
            run_trial(&c.template, check, seed, &c.tolerances, trial)
        })
        .collect();
    records.sort_by_key(|r| (r.check, r.trial));
    CampaignReport { name: c.name.clone(), seed: c.seed, records }
}

/// One trial, reproducible from `seed` alone. Solver errors become failed records with
/// value `∞` and limit `0`.
pub fn run_trial(problem: &InclusionProblem, check: Check, seed: u64, tol: &Tolerances, trial: usize) -> TrialRecord {
    let outcome = match check {
        Check::Causality => trial_causality(problem, seed),
        Check::Lipschitz => trial_lipschitz(problem, seed),
        Check::MonotonicityBound => trial_monotonicity(problem, seed, tol),
        Check::RhoIndependence => trial_rho_independence(problem, seed, tol),
        Check::YosidaAgreement => trial_yosida(problem, seed, tol),
        Check::OracleMatch => trial_oracle(problem, seed, tol),
    };
    match outcome {
        Ok((passed, value, limit, detail)) => TrialRecord { check, trial, seed, passed, value, limit, detail },
        Err(e) => TrialRecord { check, trial, seed, passed: false, value: f64::INFINITY, limit: 0.0, detail: e.to_string() },
    }
}

type Outcome = Result<(bool, f64, f64, String)>;

fn forcing_for(problem: &InclusionProblem, rng: &mut ChaCha8Rng) -> Result<WeightedSignal> {
    let f = problem.forcing();
    random_forcing(*f.grid(), f.dim(), problem.rho(), rng)
}

fn direct(problem: &InclusionProblem) -> Result<WeightedSignal> {
    Ok(solve(&problem.clone().with_mode(Mode::Direct))?.into_result()?.solution)
}

fn trial_causality(problem: &InclusionProblem, seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = forcing_for(problem, &mut rng)?;
    let n = f.len();
    let cut = rng.gen_range(0..n);
    let other = forcing_for(problem, &mut rng)?;
    let mut g = f.clone();
    for k in cut + 1..n {
        g.set_node(k, &other.node(k).into_owned());
    }
    let uf = direct(&problem.clone().with_forcing(f)?)?;
    let ug = direct(&problem.clone().with_forcing(g)?)?;
    let mismatches = (0..=cut).filter(|&k| uf.node(k) != ug.node(k)).count();
    Ok((mismatches == 0, mismatches as f64, 0.0, format!("cut={cut}")))
}

fn trial_lipschitz(problem: &InclusionProblem, seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = forcing_for(problem, &mut rng)?;
    let g = forcing_for(problem, &mut rng)?;
    let ratio = lipschitz_certificate(&problem.clone().with_forcing(f)?.with_mode(Mode::Direct), &g)?;
    let limit = (1.0 + problem.tol_dt()) / problem.c_tilde();
    Ok((ratio <= limit, ratio, limit, String::new()))
}

fn trial_monotonicity(problem: &InclusionProblem, seed: u64, tol: &Tolerances) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // smooth tapered modes; white noise would make the difference term dominate trivially
    let u = random_smooth_signal(problem, &mut rng)?;
    let fam = problem.family();
    let eps = if fam.c1().is_finite() { 0.5 * (fam.c1() - problem.c_tilde()) } else { f64::INFINITY };
    let est = monotonicity_estimate(fam, &u, eps)?;
    let rho = problem.rho();
    let limit = tol.monotonicity_factor * (rho * rho + fam.lip_m0()) * est.m0_sup;
    Ok((est.c_needed <= limit, est.c_needed, limit, format!("lhs={:e} bound={:e}", est.lhs, est.bound)))
}

fn trial_rho_independence(problem: &InclusionProblem, seed: u64, tol: &Tolerances) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = forcing_for(problem, &mut rng)?;
    let p1 = problem.clone().with_forcing(f)?;
    let rho2 = p1.rho() * tol.rho_factor;
    let p2 = p1.clone().with_rho(rho2)?;
    let u1 = direct(&p1)?;
    let u2 = direct(&p2)?;
    let same = u1.values() == u2.values();
    let diff = (u1.values() - u2.values()).amax();
    Ok((same, diff, 0.0, format!("rho={} rho2={rho2}", p1.rho())))
}

fn trial_yosida(problem: &InclusionProblem, seed: u64, tol: &Tolerances) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = forcing_for(problem, &mut rng)?;
    let p = problem.clone().with_forcing(f)?;
    let d = direct(&p)?;
    let path = solve(&p.clone().with_mode(Mode::YosidaPath))?.into_result()?;
    let lambda_min = p.lambda_schedule().last().copied().unwrap_or(0.0);
    let limit = tol.fp_factor * p.fp_tol() + tol.lambda_factor * lambda_min;
    let dist = path.solution.sup_distance(&d)?;
    let growth = path
        .lambda_trace
        .windows(2)
        .map(|w| if w[0].yosida_norm > 0.0 { w[1].yosida_norm / w[0].yosida_norm } else if w[1].yosida_norm > 0.0 { f64::INFINITY } else { 1.0 })
        .fold(0.0, f64::max);
    let ok = dist <= limit && growth <= tol.yosida_growth && path.yosida_sup_norm.is_finite();
    Ok((ok, dist, limit, format!("growth={growth:e} sup={:e}", path.yosida_sup_norm)))
}

fn trial_oracle(problem: &InclusionProblem, seed: u64, tol: &Tolerances) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = forcing_for(problem, &mut rng)?;
    let p = problem.clone().with_forcing(f)?;
    let u = direct(&p)?;
    let o = oracle_trajectory(&p)?;
    let dist = u.sup_distance(&o)?;
    let limit = tol.fp_factor * p.fp_tol();
    Ok((dist <= limit, dist, limit, String::new()))
}

// ---------------------------------------------------------------------------------------
// Branch-enumeration oracle

const BISECT_MAX: usize = 400;

/// Root of an increasing function on `[lo, hi]` (either end may be infinite) by bisection
/// down to adjacent floating-point numbers. `None` if the sign does not change.
fn bisect_increasing<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Option<f64> {
    let (mut a, mut b) = (lo, hi);
    let mut step = 1.0;
    let anchor = if lo.is_finite() { lo } else if hi.is_finite() { hi } else { 0.0 };
    if !a.is_finite() {
        a = anchor - step;
        while f(a) > 0.0 {
            step *= 2.0;
            a = anchor - step;
            if step > 1e300 {
                return None;
            }
        }
    }
    step = 1.0;
    if !b.is_finite() {
        b = anchor + step;
        while f(b) < 0.0 {
            step *= 2.0;
            b = anchor + step;
            if step > 1e300 {
                return None;
            }
        }
    }
    let (fa, fb) = (f(a), f(b));
    if fa > 0.0 || fb < 0.0 {
        return None;
    }
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    for _ in 0..BISECT_MAX {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(if f(a).abs() <= f(b).abs() { a } else { b })
}

/// Solves `g(x) + a(x) ∋ r` for increasing `g` and the scalar law `a` by trying every branch.
fn solve_scalar<G: Fn(f64) -> f64>(g: G, law: &ScalarLaw, r: f64) -> Option<f64> {
    let mut found = None;
    for branch in law.branches() {
        match branch {
            Branch::Graph { lo, hi, slope, offset } => {
                let h = |x: f64| g(x) + slope * x + offset - r;
                if let Some(x) = bisect_increasing(h, lo, hi) {
                    let res = h(x).abs();
                    if res <= 1e-12 * r.abs().max(1.0) * 1e3 && found.is_none() {
                        found = Some(x);
                    }
                }
            }
            Branch::Vertical { at, vmin, vmax } => {
                let need = r - g(at);
                if need >= vmin && need <= vmax && found.is_none() {
                    found = Some(at);
                }
            }
        }
    }
    found
}

/// Trajectory computed by branch enumeration and bisection per step, without resolvents
/// or the solver's step routine. Supports dimension ≤ 2 with coordinate-wise laws or a
/// linear relation.
pub fn oracle_trajectory(problem: &InclusionProblem) -> Result<WeightedSignal> {
    let fam = problem.family();
    let dim = fam.dim();
    ensure!(dim <= 2, "oracle supports dimension ≤ 2, got {dim}");
    let rel = problem.relation();
    let (extra, laws): (DMatrix<f64>, Vec<ScalarLaw>) = match rel.structure() {
        Structure::Linear(p) => (p.clone(), vec![ScalarLaw::Zero; dim]),
        _ => match rel.branch_laws() {
            Some(l) => (DMatrix::zeros(dim, dim), l),
            None => return Err(Error::Oracle(format!("relation {} has no branch description", rel.name()))),
        },
    };
    let f = problem.forcing();
    let grid = *f.grid();
    let dt = grid.dt();
    let mut out = WeightedSignal::zeros(grid, dim, problem.rho())?;
    let mut carry = DVector::zeros(dim);
    for k in 0..grid.len() {
        let t = grid.time(k);
        let m0 = fam.m0(t);
        let mut s = DMatrix::zeros(dim, dim);
        let m1 = fam.m1(t);
        for i in 0..dim {
            for j in 0..dim {
                s[(i, j)] = m0[(i, j)] / dt + m1[(i, j)] + extra[(i, j)];
            }
        }
        let b: Vec<f64> = (0..dim).map(|i| f.values()[(i, k)] + carry[i] / dt).collect();
        let x = if dim == 1 {
            let s00 = s[(0, 0)];
            vec![solve_scalar(|x| s00 * x, &laws[0], b[0])
                .ok_or_else(|| Error::Oracle(format!("no branch admits a solution at step {k}")))?]
        } else {
            let (s00, s01, s10, s11) = (s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)]);
            let inner = |x0: f64| solve_scalar(|x1| s11 * x1, &laws[1], b[1] - s10 * x0);
            let outer = |x0: f64| s00 * x0 + s01 * inner(x0).unwrap_or(f64::NAN);
            let x0 = solve_scalar(outer, &laws[0], b[0])
                .ok_or_else(|| Error::Oracle(format!("no branch admits a solution at step {k}")))?;
            let x1 = inner(x0).ok_or_else(|| Error::Oracle(format!("inner solve failed at step {k}")))?;
            vec![x0, x1]
        };
        let xv = DVector::from_vec(x);
        carry = &m0 * &xv;
        out.set_node(k, &xv);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------------------
// Fixed-point consistency

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointTrace {
    /// `y₀, y₁, …, y_n`.
    pub iterates: Vec<DVector<f64>>,
    /// `Lip(F)·Lip(G)`.
    pub contraction: f64,
    /// A-priori bound `q^n‖y₁ − y₀‖/(1 − q)` on the distance of the last iterate to the fixed point.
    pub a_priori_bound: f64,
}

impl FixedPointTrace {
    pub fn last(&self) -> &DVector<f64> {
        self.iterates.last().expect("nonempty")
    }
}

/// Iterates `y_{n+1} = F(x − G(y_n))` from `y0` (zero when `None`).
pub fn fixed_point_iterates(
    f: &dyn LipschitzMap,
    g: &dyn LipschitzMap,
    x: &DVector<f64>,
    y0: Option<&DVector<f64>>,
    n_iter: usize,
) -> Result<FixedPointTrace> {
    let q = f.lipschitz() * g.lipschitz();
    ensure!(q < 1.0, "Lip(F)·Lip(G) = {q} is not a contraction");
    ensure!(f.dim() == x.len() && g.dim() == x.len(), "dimension mismatch");
    let mut y = y0.cloned().unwrap_or_else(|| DVector::zeros(x.len()));
    let mut iterates = vec![y.clone()];
    for _ in 0..n_iter {
        y = f.apply(&(x - g.apply(&y)));
        iterates.push(y.clone());
    }
    let first = if iterates.len() > 1 { (&iterates[1] - &iterates[0]).norm() } else { 0.0 };
    let a_priori_bound = q.powi(n_iter as i32) * first / (1.0 - q);
    Ok(FixedPointTrace { iterates, contraction: q, a_priori_bound })
}

/// Convenience for scalar maps `y ↦ a·y`.
pub fn scalar_linear_map(a: f64) -> Arc<dyn LipschitzMap> {
    Arc::new(crate::monotone_relations::LinearMap::new(DMatrix::from_element(1, 1, a)).expect("square"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material_laws::MaterialFamily;
    use crate::monotone_relations::{DeviatoricSaturation, LinearRelation, SoftThreshold};

    fn scalar_problem(relation: Arc<dyn crate::monotone_relations::MonotoneRelation>, n: usize) -> InclusionProblem {
        let fam = MaterialFamily::constant(DMatrix::identity(1, 1), DMatrix::zeros(1, 1)).unwrap();
        let grid = TimeGrid::new(0.0, 1e-2, n).unwrap();
        InclusionProblem::new(fam, relation, WeightedSignal::zeros(grid, 1, 1.0).unwrap(), 0.5).unwrap()
    }

    #[test]
    fn empty_campaign_passes() {
        let p = scalar_problem(Arc::new(LinearRelation::identity(1)), 10);
        let r = run_campaign(&PropertyCampaign::new("empty", p, 0, 1, Check::ALL.to_vec()));
        assert!(r.passed());
        assert!(r.records.is_empty());
    }

    #[test]
    fn campaign_is_deterministic() {
        let p = scalar_problem(Arc::new(SoftThreshold::new(1, 1.0).unwrap()), 40);
        let c = PropertyCampaign::new(
            "det",
            p,
            8,
            42,
            vec![Check::Causality, Check::Lipschitz, Check::RhoIndependence, Check::OracleMatch],
        );
        let a = run_campaign(&c);
        let b = run_campaign(&c);
        assert!(a.passed(), "{}", a.to_csv());
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.summary_kv(), b.summary_kv());
        let rec = &a.records[3];
        let again = run_trial(&c.template, rec.check, rec.seed, &c.tolerances, rec.trial);
        assert_eq!(&again, rec);
    }

    #[test]
    fn oracle_matches_closed_form_linear() {
        let p = scalar_problem(Arc::new(crate::monotone_relations::ZeroRelation::new(1)), 50);
        let grid = *p.forcing().grid();
        let f = WeightedSignal::scalar(grid, 1.0, |t| (3.0 * t).cos()).unwrap();
        let p = p.with_forcing(f.clone()).unwrap();
        let o = oracle_trajectory(&p).unwrap();
        let mut u = 0.0;
        for k in 0..grid.len() {
            u += 1e-2 * f.values()[(0, k)];
            assert!((o.values()[(0, k)] - u).abs() <= 1e-12);
        }
    }

    #[test]
    fn oracle_matches_solver_on_planar_saturation() {
        let rel = Arc::new(DeviatoricSaturation::planar_restriction(0.3).unwrap());
        let fam = MaterialFamily::constant(DMatrix::identity(2, 2), DMatrix::zeros(2, 2)).unwrap();
        let grid = TimeGrid::new(0.0, 1e-2, 60).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_forcing(grid, 2, 1.0, &mut rng).unwrap().scaled(5.0);
        let p = InclusionProblem::new(fam, rel, f, 0.5).unwrap();
        let o = oracle_trajectory(&p).unwrap();
        let u = solve(&p).unwrap().into_result().unwrap().solution;
        assert!(u.sup_distance(&o).unwrap() <= 1e-9);
    }

    #[test]
    fn fixed_point_examples() {
        let x = DVector::from_element(1, 1.0);
        let t = fixed_point_iterates(scalar_linear_map(1.0).as_ref(), scalar_linear_map(0.0).as_ref(), &x, None, 3).unwrap();
        assert_eq!(t.iterates[1][0], 1.0);
        assert_eq!(t.last()[0], 1.0);

        let half = scalar_linear_map(0.5);
        let a = fixed_point_iterates(half.as_ref(), half.as_ref(), &x, None, 60).unwrap();
        assert!((a.last()[0] - 0.4).abs() <= 1e-12);
        assert!((a.last()[0] - 0.4).abs() <= a.a_priori_bound + 1e-16);
        let b = fixed_point_iterates(half.as_ref(), half.as_ref(), &x, Some(&DVector::from_element(1, 50.0)), 60).unwrap();
        assert!((a.last()[0] - b.last()[0]).abs() <= 1e-12);
        assert!(fixed_point_iterates(scalar_linear_map(2.0).as_ref(), half.as_ref(), &x, None, 3).is_err());
    }

    #[test]
    fn random_forcing_has_unit_norm() {
        let grid = TimeGrid::new(0.0, 1e-2, 100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_forcing(grid, 3, 2.0, &mut rng).unwrap();
        assert!((weighted_norm(&f) - 1.0).abs() < 1e-14);
    }
}
