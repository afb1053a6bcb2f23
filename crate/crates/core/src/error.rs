use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parameter vector must have at least one component")]
    EmptyVector,

    #[error("non-finite parameter component at index {index}")]
    NonFiniteComponent { index: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("diverged: non-finite {quantity} after step {last_valid_step}")]
    Diverged {
        last_valid_step: usize,
        quantity: &'static str,
    },

    #[error("quadrature order {0} outside 1..=10000")]
    QuadratureOrder(usize),

    #[error("invalid integration interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },

    #[error("non-finite integrand value at x = {x}")]
    NonFiniteIntegrand { x: f64 },

    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),

    #[error("path needs at least two points to extrapolate to t = {t}")]
    PathTooShort { t: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("bias correction undefined for t = {t} < alpha = {alpha}")]
    BiasCorrectionDomain { t: f64, alpha: f64 },

    #[error("continuous trajectory covers k <= {available}, comparison needs k = {needed}")]
    InsufficientHorizon { needed: usize, available: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed CSV {path}: {reason}")]
    Csv { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
