use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid norm: {0}")]
    InvalidNorm(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("kernel patch of {cells} cells exceeds the limit of {limit} cells")]
    PatchTooLarge { cells: usize, limit: usize },

    #[error("grid spacing {dx} too coarse for kernel width {width} (need dx <= width/4)")]
    UnderResolvedKernel { dx: f64, width: f64 },

    #[error("kernel spacing {kernel} does not match grid spacing {grid}")]
    SpacingMismatch { kernel: f64, grid: f64 },

    #[error("front touches the {margin}-cell margin at time {time}")]
    FrontTouchesMargin { margin: usize, time: f64 },

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("CFL violation: dt = {dt} exceeds limit {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("non-finite value {0} in level-set field")]
    NonFinite(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
