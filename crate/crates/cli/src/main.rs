//! `evinc`: solve, check and verify evolutionary inclusions from a config file.

mod config;
mod setup;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use evinc::inclusion_solver::{solve, Status};
use evinc::material_laws::{dt_max, rho_zero};
use evinc::property_harness::{run_campaign, Check, PropertyCampaign};
use evinc::Error;

use config::{keys_help, Config};
use setup::{setup, Setup};

const OK: u8 = 0;
const USAGE: u8 = 1;
const CONDITION: u8 = 2;
const SOLVER: u8 = 3;
const CAMPAIGN: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "evinc", version, about = "Causal solver and verification harness for evolutionary inclusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    /// TOML config file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Campaign seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Solver mode, overrides solver.mode.
    #[arg(long, value_parser = ["direct", "yosida"])]
    mode: Option<String>,
    /// Weight, overrides solver.rho.
    #[arg(long, value_name = "R")]
    rho: Option<f64>,
    /// Time step, overrides grid.dt.
    #[arg(long, value_name = "R")]
    dt: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the configured problem and write solution.csv and report.txt.
    Solve(Common),
    /// Check the material-law conditions and write report.txt.
    CheckConditions(Common),
    /// Run a randomized property campaign and write campaign.csv and report.txt.
    Campaign(Common),
    /// Assemble a gallery model, print its summary and solve it.
    Gallery(Common),
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Condition { .. }
            | Error::InconsistentLipschitz { .. }
            | Error::RhoBelowThreshold { .. }
            | Error::DtTooLarge { .. } => CONDITION,
            Error::Convergence { .. } | Error::Resolvent { .. } | Error::StepFailure { .. } | Error::Oracle(_) => SOLVER,
            _ => USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: String) -> Failure {
    Failure { code: USAGE, message }
}

fn load(c: &Common) -> Result<Config, Failure> {
    let mut cfg = match &c.config {
        Some(p) => Config::from_file(p).map_err(usage)?,
        None => Config::default(),
    };
    for s in &c.set {
        cfg.set(s).map_err(usage)?;
    }
    if let Some(m) = &c.mode {
        cfg.set(&format!("solver.mode=\"{m}\"")).map_err(usage)?;
    }
    if let Some(r) = c.rho {
        cfg.set(&format!("solver.rho={r:e}")).map_err(usage)?;
    }
    if let Some(dt) = c.dt {
        cfg.set(&format!("grid.dt={dt:e}")).map_err(usage)?;
    }
    Ok(cfg)
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
    println!("{}", path.display());
    Ok(())
}

fn header(s: &Setup) -> String {
    let mut out = String::new();
    writeln!(out, "problem.label = {}", s.label).unwrap();
    writeln!(out, "problem.dim = {}", s.family.dim()).unwrap();
    writeln!(out, "grid.steps = {}", s.grid.len()).unwrap();
    out
}

/// Runs the conditions check; on failure writes the report and stops with exit code 2.
fn gate(s: &Setup, cfg: &Config, out: &Path, report: &mut String) -> Result<(), Failure> {
    let cond = s.conditions(cfg);
    report.push_str(&cond.to_kv());
    if !cond.passed() {
        write(out, "report.txt", report)?;
        return Err(Failure {
            code: CONDITION,
            message: format!("conditions failed for {}: {}", s.label, cond.failures().join(", ")),
        });
    }
    Ok(())
}

fn run_solve(c: &Common, gallery: bool) -> Result<u8, Failure> {
    let cfg = load(c)?;
    let s = setup(&cfg)?;
    if gallery && s.model.is_none() {
        return Err(usage("gallery needs problem.kind = thermoplasticity or viscoplasticity".into()));
    }
    let mut report = header(&s);
    match &s.model {
        Some(m) if m.problem.family().claims() == s.family.claims() => report.push_str(&m.summary()),
        _ => gate(&s, &cfg, &c.out, &mut report)?,
    }
    let problem = s.problem(&cfg)?;
    let result = solve(&problem);
    let rep = match result {
        Ok(r) => r,
        Err(e) => {
            let f = Failure::from(e);
            writeln!(report, "solve.status = rejected").unwrap();
            writeln!(report, "solve.error = {}", f.message).unwrap();
            write(&c.out, "report.txt", &report)?;
            return Err(f);
        }
    };
    report.push_str(&rep.to_kv());
    write(&c.out, "solution.csv", &rep.solution.to_csv())?;
    write(&c.out, "report.txt", &report)?;
    match &rep.status {
        Status::Converged => Ok(OK),
        Status::Failed { step, reason } => {
            Err(Failure { code: SOLVER, message: format!("solver failed at step {step}: {reason}") })
        }
    }
}

fn run_check(c: &Common) -> Result<u8, Failure> {
    let cfg = load(c)?;
    let s = setup(&cfg)?;
    let mut report = header(&s);
    gate(&s, &cfg, &c.out, &mut report)?;
    let c_tilde = s.problem(&cfg).map(|p| p.c_tilde());
    if let Ok(ct) = c_tilde {
        let fmt = |r: evinc::Result<f64>| r.map(|x| format!("{x:.16e}")).unwrap_or_else(|e| format!("n/a ({e})"));
        writeln!(report, "admission.c_tilde = {ct:.16e}").unwrap();
        writeln!(report, "admission.rho_zero = {}", fmt(rho_zero(&s.family, ct))).unwrap();
        writeln!(report, "admission.dt_max = {}", fmt(dt_max(&s.family, ct))).unwrap();
    }
    write(&c.out, "report.txt", &report)?;
    Ok(OK)
}

fn run_campaign_cmd(c: &Common) -> Result<u8, Failure> {
    let cfg = load(c)?;
    let s = setup(&cfg)?;
    let mut report = header(&s);
    gate(&s, &cfg, &c.out, &mut report)?;
    let problem = s.problem(&cfg)?;
    let checks = cfg
        .str("campaign.checks")
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(Check::parse)
        .collect::<evinc::Result<Vec<_>>>()?;
    let seed = c.seed.unwrap_or_else(|| cfg.int("campaign.seed"));
    let campaign = PropertyCampaign::new(s.label.clone(), problem, cfg.int("campaign.trials") as usize, seed, checks);
    let result = run_campaign(&campaign);
    report.push_str(&result.summary_kv());
    write(&c.out, "campaign.csv", &result.to_csv())?;
    write(&c.out, "report.txt", &report)?;
    if result.passed() {
        Ok(OK)
    } else {
        Err(Failure { code: CAMPAIGN, message: format!("{} campaign trials failed", result.failures()) })
    }
}

fn main() -> ExitCode {
    let keys = keys_help();
    let cmd = Cli::command().mut_subcommands(|sc| sc.after_help(keys.clone()));
    let matches = match cmd.try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { OK });
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(USAGE);
        }
    };
    let outcome = match &cli.command {
        Command::Solve(c) => run_solve(c, false),
        Command::Gallery(c) => run_solve(c, true),
        Command::CheckConditions(c) => run_check(c),
        Command::Campaign(c) => run_campaign_cmd(c),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("evinc: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
