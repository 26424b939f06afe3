//! Flat `section.key` configuration read from TOML, with `--set` overrides.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Str,
    Float,
    Int,
    Matrix,
}

impl Kind {
    fn label(&self) -> &'static str {
        match self {
            Kind::Str => "string",
            Kind::Float => "number",
            Kind::Int => "integer",
            Kind::Matrix => "matrix",
        }
    }
}

pub struct KeySpec {
    pub key: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub help: &'static str,
}

const fn k(key: &'static str, kind: Kind, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec { key, kind, default, help }
}

pub const KEYS: &[KeySpec] = &[
    k("problem.kind", Kind::Str, "catalog", "catalog | custom | thermoplasticity | viscoplasticity"),
    k("problem.name", Kind::Str, "scalar_ode", "catalog problem: scalar_ode | degenerate | sign_ramp | varying_scalar | planar_saturation"),
    k("grid.t0", Kind::Float, "0", "first grid time"),
    k("grid.dt", Kind::Float, "0.001", "time step"),
    k("grid.horizon", Kind::Float, "auto", "length of the time window (catalog default, else 1)"),
    k("solver.mode", Kind::Str, "direct", "direct | yosida"),
    k("solver.rho", Kind::Float, "auto", "exponential weight (default max(rho_zero, 1))"),
    k("solver.c_tilde", Kind::Float, "auto", "positivity target in (0, c1) (default c1/2, or c0/2 without kernel)"),
    k("solver.fp_tol", Kind::Float, "1e-10", "per-step fixed-point tolerance"),
    k("solver.fp_max_iter", Kind::Int, "100000", "per-step iteration cap"),
    k("solver.lambda_start", Kind::Float, "1", "first Yosida parameter"),
    k("solver.lambda_min", Kind::Float, "1e-6", "last Yosida parameter"),
    k("solver.lambda_factor", Kind::Float, "0.5", "ratio between Yosida parameters"),
    k("material.m0", Kind::Matrix, "[[1.0]]", "custom M0 (rows, or a list of diagonal entries)"),
    k("material.m1", Kind::Matrix, "[[0.0]]", "custom M1 (rows, or a list of diagonal entries)"),
    k("claims.lip_m0", Kind::Float, "derived", "override of the claimed Lipschitz constant of M0"),
    k("claims.sup_m1", Kind::Float, "derived", "override of the claimed bound on |M1|"),
    k("claims.c0", Kind::Float, "derived", "override of the claimed positivity of M0 on its range"),
    k("claims.c1", Kind::Float, "derived", "override of the claimed positivity of Re M1 on ker M0"),
    k("relation.kind", Kind::Str, "zero", "custom relation: zero | identity | sign | ball"),
    k("relation.param", Kind::Float, "1", "weight of sign, radius of ball"),
    k("forcing.kind", Kind::Str, "default", "default | zero | constant | sine | pulse"),
    k("forcing.amplitude", Kind::Float, "1", "forcing amplitude"),
    k("forcing.omega", Kind::Float, "1", "angular frequency of sine forcing"),
    k("forcing.t_on", Kind::Float, "0", "pulse start"),
    k("forcing.t_off", Kind::Float, "1", "pulse end"),
    k("forcing.field", Kind::Str, "all", "gallery field receiving the forcing (v, T, theta, q, w) or all"),
    k("conditions.samples", Kind::Int, "64", "number of sample times for the conditions check"),
    k("thermoplasticity.m", Kind::Int, "2", "slab cells"),
    k("thermoplasticity.mass", Kind::Float, "1", "mass density level"),
    k("thermoplasticity.elasticity", Kind::Float, "1", "elasticity level"),
    k("thermoplasticity.w", Kind::Float, "1", "heat capacity level"),
    k("thermoplasticity.kappa", Kind::Float, "1", "conductivity level"),
    k("thermoplasticity.kappa_amplitude", Kind::Float, "0", "relative sinusoidal variation of kappa"),
    k("thermoplasticity.kappa_omega", Kind::Float, "1", "angular frequency of the kappa variation"),
    k("thermoplasticity.c", Kind::Float, "1", "thermal coupling"),
    k("thermoplasticity.tau0", Kind::Float, "1", "relaxation time"),
    k("thermoplasticity.s0", Kind::Float, "1", "saturation level of the plastic relation"),
    k("viscoplasticity.m", Kind::Int, "2", "slab cells"),
    k("viscoplasticity.mass", Kind::Float, "1", "mass density level"),
    k("viscoplasticity.d", Kind::Float, "1", "compliance level"),
    k("viscoplasticity.l", Kind::Float, "1", "hardening level"),
    k("viscoplasticity.coupling", Kind::Str, "deviatoric", "B: deviatoric (N = 5) | zero"),
    k("viscoplasticity.law", Kind::Str, "soft_threshold", "soft_threshold | ball"),
    k("viscoplasticity.law_param", Kind::Float, "1", "threshold weight or ball radius"),
    k("campaign.trials", Kind::Int, "20", "trials per check"),
    k("campaign.checks", Kind::Str, "causality,lipschitz,monotonicity_bound,rho_independence", "comma-separated checks"),
    k("campaign.seed", Kind::Int, "0", "campaign seed (overridden by --seed)"),
];

/// Text listing every recognized key, for `--help`.
pub fn keys_help() -> String {
    let mut s = String::from("Config keys (TOML sections, or --set section.key=value):\n");
    for spec in KEYS {
        writeln!(s, "  {:<34} {:<7} default {:<12} {}", spec.key, spec.kind.label(), spec.default, spec.help).unwrap();
    }
    s
}

fn spec(key: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|s| s.key == key)
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, Value>,
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| e.message().to_string())?;
        let mut cfg = Config::default();
        for (section, body) in table {
            let Value::Table(body) = body else {
                return Err(format!("top-level key `{section}` must be a [section]"));
            };
            for (key, value) in body {
                cfg.insert(&format!("{section}.{key}"), value)?;
            }
        }
        Ok(cfg)
    }

    /// Applies `section.key=value`; the value is read as a TOML literal, else as a string.
    pub fn set(&mut self, assignment: &str) -> Result<(), String> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| format!("--set expects key=value, got `{assignment}`"))?;
        let key = key.trim();
        let raw = raw.trim();
        let value = format!("v = {raw}")
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));
        self.insert(key, value)
    }

    fn insert(&mut self, key: &str, value: Value) -> Result<(), String> {
        let spec = spec(key).ok_or_else(|| format!("unknown config key `{key}` (see --help)"))?;
        let ok = match spec.kind {
            Kind::Str => value.is_str(),
            Kind::Float => matches!(value, Value::Float(_) | Value::Integer(_)),
            Kind::Int => matches!(value, Value::Integer(i) if i >= 0),
            Kind::Matrix => parse_matrix(&value).is_ok(),
        };
        if !ok {
            return Err(format!("key `{key}` expects a {}, got `{value}`", spec.kind.label()));
        }
        self.values.insert(key.to_string(), value);
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn str(&self, key: &str) -> String {
        match self.values.get(key) {
            Some(Value::String(s)) => s.clone(),
            _ => spec(key).expect("registered key").default.to_string(),
        }
    }

    pub fn float_opt(&self, key: &str) -> Option<f64> {
        match self.values.get(key) {
            Some(Value::Float(x)) => Some(*x),
            Some(Value::Integer(i)) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn float(&self, key: &str) -> f64 {
        self.float_opt(key)
            .unwrap_or_else(|| spec(key).expect("registered key").default.parse().expect("numeric default"))
    }

    pub fn int(&self, key: &str) -> u64 {
        match self.values.get(key) {
            Some(Value::Integer(i)) => *i as u64,
            _ => spec(key).expect("registered key").default.parse().expect("integer default"),
        }
    }

    pub fn matrix(&self, key: &str) -> DMatrix<f64> {
        match self.values.get(key) {
            Some(v) => parse_matrix(v).expect("validated on insert"),
            None => {
                let v: Value = format!("v = {}", spec(key).expect("registered key").default)
                    .parse::<Table>()
                    .expect("matrix default")
                    .remove("v")
                    .expect("v");
                parse_matrix(&v).expect("matrix default")
            }
        }
    }
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

/// Square matrix from rows, or diagonal from a flat list.
fn parse_matrix(v: &Value) -> Result<DMatrix<f64>, String> {
    let Value::Array(items) = v else { return Err("expected an array".into()) };
    if items.is_empty() {
        return Err("empty matrix".into());
    }
    if items.iter().all(|x| number(x).is_some()) {
        let d: Vec<f64> = items.iter().filter_map(number).collect();
        return Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)));
    }
    let n = items.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in items.iter().enumerate() {
        let Value::Array(row) = row else { return Err("rows must be arrays".into()) };
        if row.len() != n {
            return Err(format!("row {i} has {} entries, expected {n}", row.len()));
        }
        for (j, x) in row.iter().enumerate() {
            m[(i, j)] = number(x).ok_or_else(|| format!("entry ({i},{j}) is not a number"))?;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_overrides() {
        let mut c = Config::from_toml("[grid]\ndt = 0.01\n[problem]\nname = \"degenerate\"\n").unwrap();
        assert_eq!(c.float("grid.dt"), 0.01);
        assert_eq!(c.str("problem.name"), "degenerate");
        c.set("grid.dt=2e-3").unwrap();
        c.set("problem.kind=custom").unwrap();
        c.set("material.m0=[1, 0]").unwrap();
        assert_eq!(c.float("grid.dt"), 2e-3);
        assert_eq!(c.str("problem.kind"), "custom");
        assert_eq!(c.matrix("material.m0")[(1, 1)], 0.0);
        assert_eq!(c.float("forcing.amplitude"), 1.0);
    }

    #[test]
    fn rejects_unknown_and_mistyped_keys() {
        assert!(Config::from_toml("[grid]\nd_t = 0.01\n").is_err());
        assert!(Config::from_toml("dt = 0.01\n").is_err());
        assert!(Config::from_toml("[grid]\ndt = \"fast\"\n").is_err());
        assert!(Config::from_toml("[material]\nm0 = [[1, 2], [3]]\n").is_err());
        assert!(Config::default().set("nokey=1").is_err());
        assert!(Config::default().set("grid.dt").is_err());
    }

    #[test]
    fn help_lists_every_key() {
        let h = keys_help();
        assert!(KEYS.iter().all(|k| h.contains(k.key)));
    }
}
