use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("temperature is undefined for occupation {0}")]
    UndefinedTemperature(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state invariant violated at t = {time}: {detail}")]
    InvariantViolation { time: f64, detail: String },

    #[error("integration step underflow at t = {time} (step {step:e})")]
    StepUnderflow { time: f64, step: f64 },

    #[error("limit cycle did not converge after {cycles} cycles (last residual {residual:e})")]
    NonConvergence { cycles: usize, residual: f64 },

    #[error("trajectory does not describe a closed cycle: {0}")]
    OpenCycle(String),

    #[error("moment integration diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}
