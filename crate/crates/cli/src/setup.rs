//! Turns a [`Config`] into a material family, a relation and an inclusion problem.

use std::sync::Arc;

use evinc::inclusion_solver::{geometric_schedule, InclusionProblem, Mode};
use evinc::material_laws::{check_conditions, rho_zero, Claims, ConditionsReport, MaterialFamily, ScalarCoefficient};
use evinc::model_gallery::{
    build_thermoplasticity, build_viscoplasticity, GLaw, GalleryModel, ModelSetup, SlabGrid, ThermoCoefficients,
    ViscoCoefficients,
};
use evinc::monotone_relations::{BallSaturation, LinearRelation, MonotoneRelation, SoftThreshold, ZeroRelation};
use evinc::problems::CatalogProblem;
use evinc::weighted_space::{TimeGrid, WeightedSignal};
use evinc::{Error, Result};
use nalgebra::{DMatrix, DVector};

use crate::config::Config;

pub struct Setup {
    pub label: String,
    pub family: MaterialFamily,
    pub relation: Arc<dyn MonotoneRelation>,
    pub grid: TimeGrid,
    pub model: Option<GalleryModel>,
    catalog: Option<CatalogProblem>,
}

fn parse_err(msg: String) -> Error {
    Error::Parse(msg)
}

pub fn setup(cfg: &Config) -> Result<Setup> {
    let kind = cfg.str("problem.kind");
    let catalog = match kind.as_str() {
        "catalog" => Some(CatalogProblem::parse(&cfg.str("problem.name"))?),
        "custom" | "thermoplasticity" | "viscoplasticity" => None,
        other => return Err(parse_err(format!("unknown problem.kind `{other}`"))),
    };
    let horizon = cfg
        .float_opt("grid.horizon")
        .unwrap_or_else(|| catalog.map_or(1.0, |c| c.default_horizon()));
    let grid = TimeGrid::with_horizon(cfg.float("grid.t0"), cfg.float("grid.dt"), horizon)?;

    let (label, family, relation, model) = match kind.as_str() {
        "catalog" => {
            let c = catalog.expect("parsed above");
            (c.name().to_string(), c.family(), c.relation(), None)
        }
        "custom" => {
            let m0 = cfg.matrix("material.m0");
            let m1 = cfg.matrix("material.m1");
            if m0.nrows() != m1.nrows() {
                return Err(parse_err(format!("material.m0 is {0}x{0} but material.m1 is {1}x{1}", m0.nrows(), m1.nrows())));
            }
            let n = m0.nrows();
            let p = cfg.float("relation.param");
            let relation: Arc<dyn MonotoneRelation> = match cfg.str("relation.kind").as_str() {
                "zero" => Arc::new(ZeroRelation::new(n)),
                "identity" => Arc::new(LinearRelation::identity(n)),
                "sign" => Arc::new(SoftThreshold::new(n, p)?),
                "ball" => Arc::new(BallSaturation::new(n, p)?),
                other => return Err(parse_err(format!("unknown relation.kind `{other}`"))),
            };
            ("custom".to_string(), MaterialFamily::constant(m0, m1)?.with_name("custom"), relation, None)
        }
        _ => {
            let ms = ModelSetup { grid, c_tilde: cfg.float_opt("solver.c_tilde"), rho: cfg.float_opt("solver.rho") };
            let model = if kind == "thermoplasticity" {
                build_thermoplasticity(slab(cfg, "thermoplasticity.m")?, thermo(cfg), ms)?
            } else {
                build_viscoplasticity(slab(cfg, "viscoplasticity.m")?, visco(cfg)?, ms)?
            };
            let fam = model.problem.family().clone();
            let rel = model.problem.relation().clone();
            (model.name.to_string(), fam, rel, Some(model))
        }
    };
    let family = apply_claims(cfg, family)?;
    Ok(Setup { label, family, relation, grid, model, catalog })
}

fn slab(cfg: &Config, key: &str) -> Result<SlabGrid> {
    SlabGrid::new(cfg.int(key) as usize)
}

fn thermo(cfg: &Config) -> ThermoCoefficients {
    let c = |k: &str| ScalarCoefficient::constant(cfg.float(&format!("thermoplasticity.{k}")));
    ThermoCoefficients {
        mass: c("mass"),
        elasticity: c("elasticity"),
        w: c("w"),
        kappa: ScalarCoefficient::sinusoidal(
            cfg.float("thermoplasticity.kappa"),
            cfg.float("thermoplasticity.kappa_amplitude"),
            cfg.float("thermoplasticity.kappa_omega"),
            0.0,
        ),
        c: cfg.float("thermoplasticity.c"),
        tau0: cfg.float("thermoplasticity.tau0"),
        s0: cfg.float("thermoplasticity.s0"),
    }
}

fn visco(cfg: &Config) -> Result<ViscoCoefficients> {
    let c = |k: &str| ScalarCoefficient::constant(cfg.float(&format!("viscoplasticity.{k}")));
    let base = ViscoCoefficients::default();
    let b = match cfg.str("viscoplasticity.coupling").as_str() {
        "deviatoric" => base.b.clone(),
        "zero" => DMatrix::zeros(base.b.nrows(), base.b.ncols()),
        other => return Err(parse_err(format!("unknown viscoplasticity.coupling `{other}`"))),
    };
    let p = cfg.float("viscoplasticity.law_param");
    let g = match cfg.str("viscoplasticity.law").as_str() {
        "soft_threshold" => GLaw::SoftThreshold { r: p },
        "ball" => GLaw::BallSaturation { s: p },
        other => return Err(parse_err(format!("unknown viscoplasticity.law `{other}`"))),
    };
    Ok(ViscoCoefficients { mass: c("mass"), d: c("d"), l: c("l"), b, g })
}

fn apply_claims(cfg: &Config, family: MaterialFamily) -> Result<MaterialFamily> {
    let keys = ["claims.lip_m0", "claims.sup_m1", "claims.c0", "claims.c1"];
    if !keys.iter().any(|k| cfg.contains(k)) {
        return Ok(family);
    }
    let base = family.claims();
    let claims = Claims {
        lip_m0: cfg.float_opt("claims.lip_m0").unwrap_or(base.lip_m0),
        sup_m1: cfg.float_opt("claims.sup_m1").unwrap_or(base.sup_m1),
        c0: cfg.float_opt("claims.c0").unwrap_or(base.c0),
        c1: cfg.float_opt("claims.c1").unwrap_or(base.c1),
    };
    family.with_claims(claims)
}

impl Setup {
    pub fn conditions(&self, cfg: &Config) -> ConditionsReport {
        let n = (cfg.int("conditions.samples") as usize).clamp(1, self.grid.len());
        let times: Vec<f64> = (0..n).map(|i| self.grid.time(i * (self.grid.len() - 1) / (n - 1).max(1))).collect();
        check_conditions(&self.family, &times)
    }

    fn c_tilde(&self, cfg: &Config) -> f64 {
        if let Some(c) = cfg.float_opt("solver.c_tilde") {
            return c;
        }
        if let Some(m) = &self.model {
            return m.problem.c_tilde();
        }
        if let Some(c) = self.catalog {
            return c.default_c_tilde();
        }
        let c1 = self.family.c1();
        if c1.is_finite() {
            0.5 * c1
        } else {
            0.5 * self.family.c0()
        }
    }

    pub fn problem(&self, cfg: &Config) -> Result<InclusionProblem> {
        let c_tilde = self.c_tilde(cfg);
        let rho = match cfg.float_opt("solver.rho") {
            Some(r) => r,
            None => rho_zero(&self.family, c_tilde)?.max(1.0),
        };
        let forcing = self.forcing(cfg, rho)?;
        let mode = match cfg.str("solver.mode").as_str() {
            "direct" => Mode::Direct,
            "yosida" => Mode::YosidaPath,
            other => return Err(parse_err(format!("unknown solver.mode `{other}`"))),
        };
        let schedule = geometric_schedule(
            cfg.float("solver.lambda_start"),
            cfg.float("solver.lambda_min"),
            cfg.float("solver.lambda_factor"),
        )?;
        InclusionProblem::new(self.family.clone(), self.relation.clone(), forcing, c_tilde)?
            .with_mode(mode)
            .with_fp(cfg.float("solver.fp_tol"), cfg.int("solver.fp_max_iter") as usize)?
            .with_schedule(schedule)
    }

    fn forcing(&self, cfg: &Config, rho: f64) -> Result<WeightedSignal> {
        let dim = self.family.dim();
        let field = cfg.str("forcing.field");
        let mask: Vec<bool> = if field == "all" {
            vec![true; dim]
        } else {
            let m = self.model.as_ref().ok_or_else(|| parse_err("forcing.field applies to gallery models only".into()))?;
            let (off, len) = m.field(&field).ok_or_else(|| parse_err(format!("model has no field `{field}`")))?;
            (0..dim).map(|i| i >= off && i < off + len).collect()
        };
        let a = cfg.float("forcing.amplitude");
        let w = cfg.float("forcing.omega");
        let (on, off) = (cfg.float("forcing.t_on"), cfg.float("forcing.t_off"));
        let mut kind = cfg.str("forcing.kind");
        if kind == "default" {
            kind = match (self.catalog, &self.model) {
                (Some(_), _) => "catalog".into(),
                (None, Some(_)) => "zero".into(),
                (None, None) => "constant".into(),
            };
        }
        let profile: Box<dyn Fn(f64) -> f64> = match kind.as_str() {
            "catalog" => {
                let c = self.catalog.expect("catalog kind");
                return WeightedSignal::from_fn(self.grid, dim, rho, |t| {
                    let v = c.forcing_value(t);
                    DVector::from_fn(dim, |i, _| if mask[i] { v[i] } else { 0.0 })
                });
            }
            "zero" => Box::new(|_| 0.0),
            "constant" => Box::new(move |_| a),
            "sine" => Box::new(move |t| a * (w * t).sin()),
            "pulse" => Box::new(move |t| if t >= on && t < off { a } else { 0.0 }),
            other => return Err(parse_err(format!("unknown forcing.kind `{other}`"))),
        };
        WeightedSignal::from_fn(self.grid, dim, rho, |t| {
            let v = profile(t);
            DVector::from_fn(dim, |i, _| if mask[i] { v } else { 0.0 })
        })
    }
}
