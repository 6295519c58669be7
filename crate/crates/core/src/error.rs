use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("basis is rank deficient: smallest singular value {smallest:e} <= threshold {threshold:e}")]
    RankDeficientBasis { smallest: f64, threshold: f64 },

    #[error("invalid rank {rank} for ambient dimension {ambient_dim} (must lie in 1..={max})", max = ambient_dim.saturating_sub(1))]
    InvalidRank { rank: usize, ambient_dim: usize },

    #[error("gaussian draw stayed rank deficient after {attempts} attempts")]
    DegenerateSample { attempts: usize },

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("projection {index} violates invariants: {violations:?}")]
    Invariant {
        index: usize,
        violations: Vec<crate::projection::Violation>,
    },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("grid of {nodes} nodes exceeds the cap of {cap}")]
    BudgetExceeded { nodes: u128, cap: u128 },

    #[error("projection {index} has rank {rank}, expected a line")]
    NonRankOne { index: usize, rank: usize },

    #[error("{count} lines would need 2^{} partitions, above the cap of {cap} lines", count - 1)]
    PartitionCapExceeded { count: usize, cap: usize },

    #[error("degenerate witness: collision vector norm {norm:e} below threshold")]
    DegenerateWitness { norm: f64 },

    #[error("degenerate linear system: null space is trivial (smallest singular value {sigma:e})")]
    DegenerateSystem { sigma: f64 },

    #[error("negative measurement {value:e} at index {index}")]
    NegativeMeasurement { index: usize, value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("full spark sampling failed after {attempts} attempts")]
    FullSparkSamplingFailed { attempts: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
