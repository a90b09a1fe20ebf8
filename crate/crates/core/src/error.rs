use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid step mismatch: {left} MW vs {right} MW (regrid first)")]
    StepMismatch { left: f64, right: f64 },

    #[error("invalid probability mass: {0}")]
    InvalidMass(String),

    #[error("distribution not normalized: total mass {0}")]
    NotNormalized(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("bracketing failed: {0}")]
    Bracket(String),

    #[error("oracle refused: {0}")]
    OracleRefused(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
