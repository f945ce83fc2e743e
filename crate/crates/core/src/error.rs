use std::io;

/// Errors raised by the solver, the observation operators and the harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("inverse Laplacian requires a zero mean mode")]
    NonzeroMean,
    #[error("invalid observation spec: {0}")]
    InvalidObservation(String),
    #[error("assimilated step requires an observation spec and an assimilated field")]
    MissingObservation,
    #[error("invalid forcing: {0}")]
    InvalidForcing(String),
    #[error("CFL number {cfl:.4} exceeds 1 at t={t}")]
    CflExceeded { cfl: f64, t: f64 },
    #[error("non-finite field values at t={t}")]
    NonFinite { t: f64 },
    #[error("empty error series")]
    EmptySeries,
    #[error("invalid metric parameters: {0}")]
    InvalidMetric(String),
    #[error("no spectrum samples accumulated")]
    NoSamples,
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("checkpoint config hash {found} does not match {expected}")]
    ConfigHashMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Short stable identifier used in machine-readable CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::GridMismatch => "grid_mismatch",
            Error::NonzeroMean => "nonzero_mean",
            Error::InvalidObservation(_) => "invalid_observation",
            Error::MissingObservation => "missing_observation",
            Error::InvalidForcing(_) => "invalid_forcing",
            Error::CflExceeded { .. } => "cfl_exceeded",
            Error::NonFinite { .. } => "non_finite",
            Error::EmptySeries => "empty_series",
            Error::InvalidMetric(_) => "invalid_metric",
            Error::NoSamples => "no_samples",
            Error::DegenerateFit(_) => "degenerate_fit",
            Error::Config(_) => "config",
            Error::Checkpoint(_) => "checkpoint",
            Error::ConfigHashMismatch { .. } => "config_hash_mismatch",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
