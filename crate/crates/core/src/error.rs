use thiserror::Error;

/// Errors surfaced by the tomography library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("eigensolver failed to converge for a {dim}x{dim} matrix after {max_iter} iterations")]
    EigenConvergence { dim: usize, max_iter: usize },

    #[error("not a density matrix: {0}")]
    NotAState(String),

    #[error("rank parameter {r} out of range [1, {d}]")]
    RankOutOfRange { r: usize, d: usize },

    #[error("unsupported dimension {d}: {constraint}")]
    UnsupportedDimension { d: usize, constraint: &'static str },

    #[error("setting {setting}: outcome probabilities sum to {sum}, expected 1")]
    ProbabilityNotNormalized { setting: usize, sum: f64 },

    #[error("measurement is not tomographically complete (condition number {cond:.3e})")]
    IncompleteMeasurement { cond: f64 },

    #[error("frequencies are not normalized: {0}")]
    FrequencyNormalization(String),

    #[error("dichotomy violated for setting {setting}: f+ + f- = {sum}")]
    DichotomyViolated { setting: usize, sum: f64 },

    #[error("estimator trace is {trace}, expected 1 within {tol:e}")]
    TraceNotOne { trace: f64, tol: f64 },

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
