//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::sync::Arc;
use std::time::Instant;

use evinc::inclusion_solver::{solve, InclusionProblem};
use evinc::material_laws::ScalarCoefficient;
use evinc::model_gallery::{
    build_slab_operators, build_thermoplasticity, build_viscoplasticity, deviatoric_trace_defect, is_positive_definite,
    viscoplastic_m0, GalleryModel, ModelSetup, SlabGrid, ThermoCoefficients, ViscoCoefficients,
};
use evinc::monotone_relations::{
    resolvent, yosida, BallSaturation, BlockDiagonal, DeviatoricSaturation, LinearRelation, MonotoneRelation,
    SoftThreshold, SplitRelation, YosidaRelation, ZeroRelation,
};
use evinc::problems::CatalogProblem;
use evinc::property_harness::{oracle_trajectory, run_campaign, Check, PropertyCampaign};
use evinc::time_calculus::DerivativeOperator;
use evinc::weighted_space::TimeGrid;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_917;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn small_problems(dt: f64) -> Vec<(String, InclusionProblem)> {
    CatalogProblem::ALL
        .iter()
        .map(|p| (p.name().to_string(), p.build(p.default_grid(dt).unwrap(), None, None).unwrap()))
        .collect()
}

fn gallery() -> Vec<GalleryModel> {
    let grid = TimeGrid::with_horizon(0.0, 1e-2, 1.0).unwrap();
    let setup = ModelSetup { grid, c_tilde: None, rho: None };
    let g = SlabGrid::new(2).unwrap();
    vec![
        build_thermoplasticity(g, ThermoCoefficients::default(), setup).unwrap(),
        build_viscoplasticity(g, ViscoCoefficients::default(), setup).unwrap(),
    ]
}

fn all_problems() -> Vec<(String, InclusionProblem)> {
    let mut v = small_problems(1e-2);
    v.extend(gallery().into_iter().map(|m| (m.name.to_string(), m.problem)));
    v
}

fn campaign(problems: &[(String, InclusionProblem)], check: Check, trials: usize) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, p) in problems {
        let r = run_campaign(&PropertyCampaign::new(name.clone(), p.clone(), trials, SEED, vec![check]));
        let s = &r.summaries()[0];
        ok &= r.passed();
        parts.push(format!("{name} {}/{} worst={:.3e}", s.passed, s.trials, s.worst_margin));
        if !r.passed() {
            parts.push(format!("failing_seeds={:?}", &s.failing_seeds[..s.failing_seeds.len().min(3)]));
        }
    }
    (ok, parts.join("; "))
}

fn inverse_derivative_norm() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for rho in [1.0, 2.0, 5.0] {
        let grid = TimeGrid::with_horizon(0.0, 1e-3, 10.0).unwrap();
        let op = DerivativeOperator::new(grid, rho).unwrap();
        let norm = op.integrate_norm(300).unwrap();
        let rel = (norm * rho - 1.0).abs();
        ok &= rel <= 0.02;
        parts.push(format!("rho={rho} norm={norm:.6} rel_err={rel:.4}"));
    }
    Outcome { passed: ok, detail: parts.join("; ") }
}

fn catalog_relations() -> Vec<Arc<dyn MonotoneRelation>> {
    let lin = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, -2.0, 0.5, 1.0, 0.0, -1.0, 0.0]);
    let n = 8;
    let dev: Arc<dyn MonotoneRelation> = Arc::new(DeviatoricSaturation::new(0.5).unwrap());
    let mut k = DMatrix::zeros(n, n);
    k[(0, 1)] = 2.0;
    k[(1, 0)] = -2.0;
    k[(7, 3)] = 1.5;
    k[(3, 7)] = -1.5;
    let split = SplitRelation::new(k, BlockDiagonal::new(n, vec![((1..7).collect(), dev.clone())]).unwrap()).unwrap();
    let sign: Arc<dyn MonotoneRelation> = Arc::new(SoftThreshold::new(3, 0.7).unwrap());
    vec![
        Arc::new(ZeroRelation::new(3)),
        Arc::new(LinearRelation::new(lin).unwrap()),
        sign.clone(),
        Arc::new(BallSaturation::new(3, 1.2).unwrap()),
        dev,
        Arc::new(DeviatoricSaturation::planar_restriction(0.3).unwrap()),
        Arc::new(split),
        Arc::new(YosidaRelation::new(sign, 0.25).unwrap()),
    ]
}

fn resolvent_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut ok = true;
    let mut worst_slack = f64::NEG_INFINITY;
    let mut worst_yosida = f64::NEG_INFINITY;
    let mut identity_mismatch = 0usize;
    let mut sum_form_err: f64 = 0.0;
    for rel in catalog_relations() {
        let d = rel.dim();
        for _ in 0..10_000 {
            let lambda = 10f64.powf(rng.gen_range(-2.0..1.0));
            let x = DVector::from_fn(d, |_, _| rng.gen_range(-5.0..5.0));
            let y = DVector::from_fn(d, |_, _| rng.gen_range(-5.0..5.0));
            let jx = resolvent(rel.as_ref(), lambda, &x).unwrap();
            let jy = resolvent(rel.as_ref(), lambda, &y).unwrap();
            let dist = (&x - &y).norm();
            worst_slack = worst_slack.max((&jx - &jy).norm() - dist);
            let ax = yosida(rel.as_ref(), lambda, &x).unwrap();
            let ay = yosida(rel.as_ref(), lambda, &y).unwrap();
            worst_yosida = worst_yosida.max((&ax - &ay).norm() / dist - 1.0 / lambda);
            if ax != (&x - &jx) / lambda {
                identity_mismatch += 1;
            }
            // resolvent of the Yosida approximation
            let mu = 10f64.powf(rng.gen_range(-2.0..1.0));
            let ya = YosidaRelation::new(rel.clone(), lambda).unwrap();
            let lhs = ya.resolve(mu, &x).unwrap();
            let rhs = &x * (lambda / (lambda + mu)) + resolvent(rel.as_ref(), lambda + mu, &x).unwrap() * (mu / (lambda + mu));
            sum_form_err = sum_form_err.max((lhs - rhs).amax() / x.amax().max(1.0));
        }
    }
    ok &= worst_slack <= 1e-12 && worst_yosida <= 1e-9 && identity_mismatch == 0 && sum_form_err <= 1e-9;
    Outcome {
        passed: ok,
        detail: format!(
            "8 relations x 1e4 pairs; worst nonexpansive slack={worst_slack:.3e}; worst yosida excess={worst_yosida:.3e}; identity mismatches={identity_mismatch}; yosida-resolvent identity err={sum_form_err:.3e}"
        ),
    }
}

fn solution_lipschitz() -> Outcome {
    let probs: Vec<_> = all_problems()
        .into_iter()
        .filter(|(n, _)| n != "varying_scalar" && n != "planar_saturation")
        .collect();
    let (passed, detail) = campaign(&probs, Check::Lipschitz, 100);
    Outcome { passed, detail }
}

fn causality() -> Outcome {
    let (passed, detail) = campaign(&all_problems(), Check::Causality, 50);
    Outcome { passed, detail }
}

fn rho_independence() -> Outcome {
    let (passed, detail) = campaign(&all_problems(), Check::RhoIndependence, 10);
    Outcome { passed, detail }
}

fn monotonicity_bound() -> Outcome {
    let (passed, detail) = campaign(&all_problems(), Check::MonotonicityBound, 100);
    Outcome { passed, detail }
}

fn oracle_equivalence() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, p) in small_problems(1e-2) {
        let u = solve(&p).unwrap().into_result().unwrap().solution;
        let o = oracle_trajectory(&p).unwrap();
        let d = u.sup_distance(&o).unwrap();
        ok &= d <= 10.0 * p.fp_tol();
        parts.push(format!("{name} d={d:.2e}"));
    }
    let (rand_ok, rand_detail) = campaign(&small_problems(1e-2), Check::OracleMatch, 20);
    ok &= rand_ok;
    parts.push(format!("random: {rand_detail}"));

    let ramp = CatalogProblem::SignRamp;
    let grid = ramp.default_grid(1e-3).unwrap();
    let p = ramp.build(grid, None, None).unwrap();
    let u = solve(&p).unwrap().into_result().unwrap().solution;
    let o = oracle_trajectory(&p).unwrap();
    let d = u.sup_distance(&o).unwrap();
    let exact_err = (0..grid.len())
        .map(|k| (o.values()[(0, k)] - ramp.exact(grid.time(k)).unwrap()[0]).abs())
        .fold(0.0, f64::max);
    ok &= d <= 10.0 * p.fp_tol() && exact_err <= 5e-3;
    parts.push(format!("sign ramp dt=1e-3 d={d:.2e} exact_err={exact_err:.2e}"));
    Outcome { passed: ok, detail: parts.join("; ") }
}

fn yosida_path() -> Outcome {
    let (passed, detail) = campaign(&small_problems(1e-2), Check::YosidaAgreement, 10);
    Outcome { passed, detail }
}

fn gallery_structure() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for m in [2, 8] {
        let d = build_slab_operators(SlabGrid::new(m).unwrap()).adjointness_defect();
        ok &= d <= 1e-12;
        parts.push(format!("adjointness m={m} {d:.1e}"));
    }
    for model in gallery() {
        let d = model.skew_defect();
        ok &= d <= 1e-12 && model.conditions.passed();
        parts.push(format!("{} skew={d:.1e}", model.name));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let inputs: Vec<DVector<f64>> = (0..1000).map(|_| DVector::from_fn(6, |_, _| rng.gen_range(-10.0..10.0))).collect();
    let tr = deviatoric_trace_defect(1.0, &inputs).unwrap();
    ok &= tr <= 1e-12;
    parts.push(format!("trace defect {tr:.1e}"));

    let g = SlabGrid::new(2).unwrap();
    let setup = ModelSetup { grid: TimeGrid::new(0.0, 1e-2, 10).unwrap(), c_tilde: None, rho: None };
    let good = ViscoCoefficients::default();
    let bad = ViscoCoefficients { l: ScalarCoefficient::constant(-0.5), ..ViscoCoefficients::default() };
    let good_pd = is_positive_definite(&viscoplastic_m0(g, &good, 0.0));
    let bad_pd = is_positive_definite(&viscoplastic_m0(g, &bad, 0.0));
    let good_built = build_viscoplasticity(g, good, setup).is_ok();
    let bad_built = build_viscoplasticity(g, bad, setup).is_ok();
    ok &= good_pd && good_built && !bad_pd && !bad_built;
    parts.push(format!("visco pass set pd={good_pd} built={good_built}; fail set pd={bad_pd} built={bad_built}"));
    Outcome { passed: ok, detail: parts.join("; ") }
}

fn convergence_smoke() -> Outcome {
    let p = CatalogProblem::ScalarOde;
    let err = |dt: f64| {
        let grid = p.default_grid(dt).unwrap();
        let u = solve(&p.build(grid, None, None).unwrap()).unwrap().into_result().unwrap().solution;
        (0..grid.len()).map(|k| (u.values()[(0, k)] - p.exact(grid.time(k)).unwrap()[0]).abs()).fold(0.0, f64::max)
    };
    let e1 = err(1e-3);
    let e2 = err(5e-4);
    let ratio = e1 / e2;
    Outcome {
        passed: e1 <= 5e-3 && (1.5..=2.5).contains(&ratio),
        detail: format!("err(1e-3)={e1:.4e} err(5e-4)={e2:.4e} ratio={ratio:.4}"),
    }
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("inverse_derivative_norm", inverse_derivative_norm),
        ("resolvent_yosida_suite", resolvent_suite),
        ("solution_lipschitz", solution_lipschitz),
        ("causality", causality),
        ("rho_independence", rho_independence),
        ("monotonicity_bound", monotonicity_bound),
        ("oracle_equivalence", oracle_equivalence),
        ("yosida_path", yosida_path),
        ("gallery_structure", gallery_structure),
        ("convergence_smoke", convergence_smoke),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        let tag = if out.passed { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {name}: {tag} ({secs:.1}s) {}", i + 1, out.detail);
        failed += usize::from(!out.passed);
    }
    println!("acceptance: {failed} of 10 criteria failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
