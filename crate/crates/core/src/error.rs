use thiserror::Error;

/// Errors raised by the simulator and its diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),

    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),

    #[error("step failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("time {t} outside the recorded history [{start}, {end}]")]
    OutsideHistory { t: f64, start: f64, end: f64 },

    #[error("fit window [{lo}, {hi}] is invalid for a trajectory spanning [{start}, {end}]")]
    InvalidWindow {
        lo: f64,
        hi: f64,
        start: f64,
        end: f64,
    },

    #[error("bubble pressure balance is non-positive at R = {radius}; data left the small-perturbation regime")]
    NonPositiveBracket { radius: f64 },

    #[error("sweep run for domain size k = {k} failed: {source}")]
    SweepRun { k: f64, source: Box<Error> },

    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;
