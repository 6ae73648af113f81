//! Error type shared by all library modules.

use thiserror::Error;

/// Errors reported by grid construction, operator execution, the context
/// lifecycle, and tile decomposition.
#[derive(Debug, Error)]
pub enum GsclError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("unsupported dimension {0} (supported: 1, 2, 3)")]
    UnsupportedDimension(usize),

    #[error("index {index:?} outside allocated extent of a {dim}-d grid")]
    OutOfBounds { index: Vec<i64>, dim: usize },

    #[error("offset {offset:?} exceeds the allowed halo/footprint")]
    HaloViolation { offset: Vec<i64> },

    #[error("grid shapes do not match: {0}")]
    ShapeMismatch(String),

    #[error("access-mode violation: {0}")]
    AccessModeViolation(String),

    #[error("operators take {left} and {right} grids; fusion requires equal arity")]
    FusionArityMismatch { left: usize, right: usize },

    #[error("operator takes {expected} grids, call supplies {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("calls support at most {max} grids, got {got}")]
    UnsupportedArity { got: usize, max: usize },

    #[error("sweep axis {axis} out of range for dimension {dim}")]
    InvalidAxis { axis: usize, dim: usize },

    #[error("invalid architecture hierarchy: {0} may not be followed by {1}")]
    InvalidHierarchy(String, String),

    #[error("library phase violation: {0}")]
    PhaseViolation(String),

    #[error("context violation: {0}")]
    ContextViolation(String),

    #[error("grid storage does not match the context architecture: {0}")]
    StorageMismatch(String),

    #[error("invalid worker count {0}")]
    InvalidWorkerCount(usize),

    #[error("cannot split extent {extent} into {workers} tiles along axis {axis}")]
    OverDecomposed {
        extent: usize,
        workers: usize,
        axis: usize,
    },

    #[error("decomposition mismatch: {0}")]
    DecompositionMismatch(String),

    #[error("the same grid appears more than once in a call tuple")]
    AliasedGrids,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GsclError>;
