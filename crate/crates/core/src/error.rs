use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("network has {links} links; exhaustive mode enumeration is limited to {max} links (the independent-set count grows up to 2^n)")]
    TooManyLinks { links: usize, max: usize },

    #[error("empirical average is undefined before the first slot (t = 0)")]
    UndefinedAverage,

    #[error("increment {norm} exceeds the declared per-slot bound {bound}")]
    IncrementBound { norm: f64, bound: f64 },

    #[error("non-finite value encountered: {0}")]
    Numeric(String),

    #[error("linear program is infeasible (phase-one residual {residual:e})")]
    Infeasible { residual: f64, certificate: Vec<f64> },

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("arrival trace exhausted at slot {0}")]
    TraceExhausted(u64),

    #[error("gradient paths disagree at slot {t}: deviation {deviation:e} exceeds {tolerance:e}")]
    GradientMismatch {
        t: u64,
        deviation: f64,
        tolerance: f64,
    },

    #[error("{path}: row {row}: {msg}")]
    Parse {
        path: PathBuf,
        row: usize,
        msg: String,
    },

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
