use thiserror::Error;

/// Failures surfaced by the library. Domain failures map to exit code 1 in the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("ground-state iteration did not converge after {iterations} iterations (last update {last_update:.3e}, factor {gamma:.12})")]
    NoConvergence {
        iterations: usize,
        last_update: f64,
        gamma: f64,
        trace: Vec<f64>,
    },

    #[error("degenerate stabilizing factor {0}: the seed does not overlap the nonlinearity")]
    DegenerateSeed(f64),

    #[error("pairwise sum needs {needed} pair evaluations, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
