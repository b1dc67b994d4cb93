use thiserror::Error;

/// Failure modes surfaced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate cell {cell} on level {level}: volume {volume:e}")]
    DegenerateCell {
        level: usize,
        cell: usize,
        volume: f64,
    },

    #[error("level mismatch: expected {expected}, got {got}")]
    LevelMismatch { expected: usize, got: usize },

    #[error("matrix factorization failed for {what}")]
    Singular { what: &'static str },

    #[error("nested iteration stalled on level {level}; relative residuals {residuals:?}")]
    FmgStalled { level: usize, residuals: Vec<f64> },

    #[error("eigenvalue estimation failed: {0}")]
    Eigen(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
