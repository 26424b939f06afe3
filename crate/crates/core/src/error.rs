use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("resolvent failure: {reason} (last residual {residual:e})")]
    Resolvent { reason: String, residual: f64 },

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("condition ({condition}) violated: {detail}")]
    Condition { condition: &'static str, detail: String },

    #[error("claimed Lipschitz bound {claimed} exceeded: measured {measured}")]
    InconsistentLipschitz { claimed: f64, measured: f64 },

    #[error("time step {dt} too large: step operator not positive (suggested dt <= {suggested})")]
    DtTooLarge { dt: f64, suggested: f64 },

    #[error("weight rho = {rho} below admissible threshold {rho_zero}")]
    RhoBelowThreshold { rho: f64, rho_zero: f64 },

    #[error("step {step} failed: {reason}")]
    StepFailure { step: usize, reason: String },

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::Contract(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
