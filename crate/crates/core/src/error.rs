use thiserror::Error;

/// Errors produced by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid, profile, or experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A parameter outside the mathematical domain of an operator.
    #[error("domain error: {0}")]
    Domain(String),

    /// Block index outside the realizable range of a grid.
    #[error("block index {j} outside realizable range [{lo}, {hi}]")]
    Range { j: i32, lo: i32, hi: i32 },

    /// Inconsistent simulation or iteration state.
    #[error("state error: {0}")]
    State(String),

    /// The simulation left the admissible regime.
    #[error("simulation aborted at t = {t}: {reason}")]
    Blowup { t: f64, reason: String },

    /// A computation refused because it exceeds a declared budget.
    #[error("refused: {0}")]
    Refused(String),

    /// Fields on different grids or with incompatible component counts.
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("malformed field container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
