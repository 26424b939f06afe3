//! Named reference problems of small dimension with known behaviour.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::inclusion_solver::InclusionProblem;
use crate::material_laws::{rho_zero, MaterialFamily};
use crate::monotone_relations::{DeviatoricSaturation, LinearRelation, MonotoneRelation, SoftThreshold, ZeroRelation};
use crate::weighted_space::{TimeGrid, WeightedSignal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CatalogProblem {
    /// `u' + u = 1` from rest: `M₀ = 1`, `M₁ = 0`, `A = I`.
    ScalarOde,
    /// `M₀ = diag(1, 0)`, `M₁ = diag(0, 1)`, `A = 0`.
    Degenerate,
    /// `u' + ∂|u| ∋ 2χ_{[0,1]}`.
    SignRamp,
    /// `M₀ = 1 + ½sin(2t)`, `M₁ = ¼`, `A = ∂|·|`.
    VaryingScalar,
    /// Deviatoric saturation at level `0.3` on a two-dimensional invariant plane.
    PlanarSaturation,
}

impl CatalogProblem {
    pub const ALL: [CatalogProblem; 5] = [
        CatalogProblem::ScalarOde,
        CatalogProblem::Degenerate,
        CatalogProblem::SignRamp,
        CatalogProblem::VaryingScalar,
        CatalogProblem::PlanarSaturation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CatalogProblem::ScalarOde => "scalar_ode",
            CatalogProblem::Degenerate => "degenerate",
            CatalogProblem::SignRamp => "sign_ramp",
            CatalogProblem::VaryingScalar => "varying_scalar",
            CatalogProblem::PlanarSaturation => "planar_saturation",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown problem '{s}'")))
    }

    pub fn dim(&self) -> usize {
        match self {
            CatalogProblem::Degenerate | CatalogProblem::PlanarSaturation => 2,
            _ => 1,
        }
    }

    pub fn default_horizon(&self) -> f64 {
        match self {
            CatalogProblem::ScalarOde => 5.0,
            CatalogProblem::SignRamp => 3.0,
            _ => 4.0,
        }
    }

    pub fn family(&self) -> MaterialFamily {
        let diag = |a: f64, b: f64| DMatrix::from_diagonal(&DVector::from_vec(vec![a, b]));
        let one = |x: f64| DMatrix::from_element(1, 1, x);
        let fam = match self {
            CatalogProblem::ScalarOde | CatalogProblem::SignRamp => MaterialFamily::constant(one(1.0), one(0.0)),
            CatalogProblem::Degenerate => MaterialFamily::constant(diag(1.0, 0.0), diag(0.0, 1.0)),
            CatalogProblem::VaryingScalar => {
                MaterialFamily::sinusoidal(one(1.0), one(0.5), one(0.25), one(0.0), 2.0, 0.0)
            }
            CatalogProblem::PlanarSaturation => MaterialFamily::constant(diag(1.0, 1.0), diag(0.0, 0.0)),
        };
        fam.expect("catalog families are valid").with_name(self.name())
    }

    pub fn relation(&self) -> Arc<dyn MonotoneRelation> {
        match self {
            CatalogProblem::ScalarOde => Arc::new(LinearRelation::identity(1)),
            CatalogProblem::Degenerate => Arc::new(ZeroRelation::new(2)),
            CatalogProblem::SignRamp | CatalogProblem::VaryingScalar => {
                Arc::new(SoftThreshold::new(1, 1.0).expect("positive weight"))
            }
            CatalogProblem::PlanarSaturation => {
                Arc::new(DeviatoricSaturation::planar_restriction(0.3).expect("positive level"))
            }
        }
    }

    /// `c₁/2`, or `c₀/2` when `M₀` has no kernel.
    pub fn default_c_tilde(&self) -> f64 {
        let fam = self.family();
        if fam.c1().is_finite() {
            0.5 * fam.c1()
        } else {
            0.5 * fam.c0()
        }
    }

    pub fn forcing_value(&self, t: f64) -> DVector<f64> {
        match self {
            CatalogProblem::ScalarOde => DVector::from_element(1, if t >= 0.0 { 1.0 } else { 0.0 }),
            CatalogProblem::SignRamp => DVector::from_element(1, if (0.0..=1.0).contains(&t) { 2.0 } else { 0.0 }),
            CatalogProblem::Degenerate => DVector::from_vec(vec![t.sin(), (2.0 * t).cos()]),
            CatalogProblem::VaryingScalar => DVector::from_element(1, 3.0 * (1.5 * t).sin()),
            CatalogProblem::PlanarSaturation => DVector::from_vec(vec![2.0 * (2.0 * t).sin(), (t).cos()]),
        }
    }

    /// Closed-form solution of the continuous problem, where one is known.
    pub fn exact(&self, t: f64) -> Option<DVector<f64>> {
        match self {
            CatalogProblem::ScalarOde => Some(DVector::from_element(1, if t >= 0.0 { 1.0 - (-t).exp() } else { 0.0 })),
            CatalogProblem::SignRamp => {
                let u = if t <= 0.0 {
                    0.0
                } else if t <= 1.0 {
                    t
                } else {
                    (2.0 - t).max(0.0)
                };
                Some(DVector::from_element(1, u))
            }
            _ => None,
        }
    }

    /// Assembled problem on `grid`. `None` picks the default `c̃` and `ρ = max(ρ₀, 1)`.
    pub fn build(&self, grid: TimeGrid, c_tilde: Option<f64>, rho: Option<f64>) -> Result<InclusionProblem> {
        let fam = self.family();
        let c_tilde = c_tilde.unwrap_or_else(|| self.default_c_tilde());
        let rho = match rho {
            Some(r) => r,
            None => rho_zero(&fam, c_tilde)?.max(1.0),
        };
        let forcing = WeightedSignal::from_fn(grid, self.dim(), rho, |t| self.forcing_value(t))?;
        InclusionProblem::new(fam, self.relation(), forcing, c_tilde)
    }

    /// Grid from `t₀ = 0` with the default horizon.
    pub fn default_grid(&self, dt: f64) -> Result<TimeGrid> {
        TimeGrid::with_horizon(0.0, dt, self.default_horizon())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inclusion_solver::solve;
    use crate::material_laws::check_conditions;

    #[test]
    fn every_problem_builds_and_passes_conditions() {
        for p in CatalogProblem::ALL {
            let grid = p.default_grid(1e-2).unwrap();
            let prob = p.build(grid, None, None).unwrap();
            assert!(prob.validate().is_ok(), "{}", p.name());
            let ts: Vec<f64> = (0..32).map(|i| i as f64 * 0.2).collect();
            assert!(check_conditions(prob.family(), &ts).passed(), "{}", p.name());
            assert_eq!(CatalogProblem::parse(p.name()).unwrap(), p);
        }
    }

    #[test]
    fn closed_forms_are_tracked() {
        for p in [CatalogProblem::ScalarOde, CatalogProblem::SignRamp] {
            let grid = p.default_grid(1e-3).unwrap();
            let u = solve(&p.build(grid, None, None).unwrap()).unwrap().into_result().unwrap().solution;
            let err = (0..grid.len())
                .map(|k| (u.values()[(0, k)] - p.exact(grid.time(k)).unwrap()[0]).abs())
                .fold(0.0, f64::max);
            assert!(err <= 5e-3, "{} {err}", p.name());
        }
    }
}
