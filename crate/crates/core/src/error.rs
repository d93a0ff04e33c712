use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("sphere dimension must be at least 1 (ambient dimension at least 2), got ambient {0}")]
    DimensionTooSmall(usize),

    #[error("vector norm {0:e} is too small to project onto the sphere")]
    NearZeroVector(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("vector is not tangent at its base point (inner product {0:e})")]
    NotTangent(f64),

    #[error("log map undefined at cut locus (distance {0})")]
    CutLocus(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("finite-difference stencil crosses zero (lambda {lambda}, h {h}): shrink h")]
    StencilCrossesZero { lambda: f64, h: f64 },

    #[error("weights must be non-negative and not all zero")]
    ZeroWeights,

    #[error("ill-posed initialization: weighted extrinsic mean has norm {0:e}")]
    IllPosedInitialization(f64),

    #[error("degenerate sample: concentration unbounded (c_hat = {0:e})")]
    DegenerateSample(f64),

    #[error("dispersion constant {0} outside the admissible range (0, pi^2/2)")]
    DispersionOutOfRange(f64),

    #[error("need at least {needed} observations, got {found}")]
    TooFewObservations { needed: usize, found: usize },

    #[error("no observations")]
    NoObservations,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
