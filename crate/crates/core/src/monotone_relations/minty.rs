use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{resolvent_split, MonotoneRelation};
use crate::error::{ensure, Result};

const INCLUSION_TOL: f64 = 1e-8;
const EXPANSION_SLACK: f64 = 1e-12;

/// Outcome of a surjectivity smoke test. Not a proof of maximality.
#[derive(Debug, Clone, PartialEq)]
pub struct MintyReport {
    pub samples: usize,
    /// False when the relation cannot evaluate its graph; only nonexpansiveness was checked.
    pub inclusion_checked: bool,
    pub inclusion_failures: usize,
    pub nonexpansive_pairs: usize,
    pub nonexpansive_failures: usize,
    pub max_inclusion_residual: f64,
    /// Largest `|J y₁ − J y₂| − |y₁ − y₂|` seen.
    pub max_expansion: f64,
    /// Targets whose resolvent image failed the inclusion check.
    pub failed_targets: Vec<DVector<f64>>,
}

impl MintyReport {
    pub fn passed(&self) -> bool {
        self.inclusion_failures == 0 && self.nonexpansive_failures == 0
    }
}

/// Draws targets uniformly in the ball of `radius`, checks that `(J_λ y, A_λ y)` lies in
/// the graph and that consecutive targets are not pulled apart.
pub fn minty_scan(
    a: &dyn MonotoneRelation,
    lambda: f64,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<MintyReport> {
    ensure!(lambda > 0.0, "lambda must be positive");
    ensure!(radius > 0.0, "radius must be positive");
    let dim = a.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = MintyReport {
        samples,
        inclusion_checked: true,
        inclusion_failures: 0,
        nonexpansive_pairs: 0,
        nonexpansive_failures: 0,
        max_inclusion_residual: 0.0,
        max_expansion: f64::NEG_INFINITY,
        failed_targets: Vec::new(),
    };
    let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;
    for _ in 0..samples {
        let dir = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let r = radius * rng.gen::<f64>().powf(1.0 / dim as f64);
        let y = if dir.norm() > 0.0 { &dir * (r / dir.norm()) } else { dir };
        let (x, v) = resolvent_split(a, lambda, &y)?;
        match a.inclusion_residual(&x, &v) {
            Some(res) => {
                report.max_inclusion_residual = report.max_inclusion_residual.max(res);
                if !(res <= INCLUSION_TOL) {
                    report.inclusion_failures += 1;
                    report.failed_targets.push(y.clone());
                }
            }
            None => report.inclusion_checked = false,
        }
        if let Some((py, px)) = &prev {
            let excess = (&x - px).norm() - (&y - py).norm();
            report.max_expansion = report.max_expansion.max(excess);
            report.nonexpansive_pairs += 1;
            if excess > EXPANSION_SLACK {
                report.nonexpansive_failures += 1;
            }
        }
        prev = Some((y, x));
    }
    if !report.inclusion_checked {
        report.inclusion_failures = 0;
        report.max_inclusion_residual = f64::NAN;
    }
    Ok(report)
}
