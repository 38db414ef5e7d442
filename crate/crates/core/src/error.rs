use thiserror::Error;

/// Errors surfaced by planning, simulation, and trace handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("depth {depth} out of range [1, {max}]")]
    DepthOutOfRange { depth: usize, max: usize },

    #[error("oracle utility model requires per-stage confidences")]
    MissingOracle,

    #[error("no feasible schedule for the mandatory parts")]
    InfeasibleMandatory,

    #[error("instance too large for exhaustive search: {combinations} > cap {cap}")]
    InstanceTooLarge { combinations: u128, cap: u128 },

    #[error("trace parse error at line {line}: {msg}")]
    TraceParse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
