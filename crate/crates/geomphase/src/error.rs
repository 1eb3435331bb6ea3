//! Error types shared across the crate.

use thiserror::Error;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// The input (scenario document, matrix shape, parameter value) is invalid.
    Validation,
    /// A numerical contract was violated at run time (rank change, trace
    /// drift, tolerance blow-up).
    Numerical,
    /// Filesystem trouble.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max deviation {deviation:.3e} exceeds {tolerance:.1e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is rank deficient: smallest singular value {sigma_min:.3e}")]
    RankDeficient { sigma_min: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:.3e}")]
    NotPsd { eigenvalue: f64 },

    #[error("matrix is not unitary: deviation {deviation:.3e} exceeds {tolerance:.1e}")]
    NotUnitary { deviation: f64, tolerance: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("invalid value for {field}: {message}")]
    InvalidValue { field: String, message: String },

    #[error("matrix entries must be finite, found a NaN or infinity")]
    NonFiniteEntry,

    #[error(
        "eigenvalue branch {branch} reached {value:.3e} at t = {time:.6}, \
         crossing min_eigenvalue = {threshold:.1e}; trajectories with a \
         changing rank are not supported"
    )]
    RankChange {
        branch: usize,
        value: f64,
        time: f64,
        threshold: f64,
    },

    #[error(
        "branch overlap between consecutive samples is too weak \
         (best |overlap| = {best:.3}); refine the time grid"
    )]
    AmbiguousOverlap { best: f64 },

    #[error("degeneracy clusters merge or split along the trajectory; degeneracies that vary in time are not supported")]
    DegeneracyDrift,

    #[error("trace drifted by {drift:.3e} (tolerance {tolerance:.1e}); reduce the time step")]
    TraceDrift { drift: f64, tolerance: f64 },

    #[error("component norm vanished for branch {branch} at sample {sample}")]
    VanishingComponent { branch: usize, sample: usize },

    #[error("vanishing denominator p_k + p_k' = {value:.3e} in the transport generator")]
    VanishingDenominator { value: f64 },

    #[error("operation requires a unitary (constant-spectrum) trajectory: eigenvalues drift by {drift:.3e}")]
    NotUnitaryEvolution { drift: f64 },

    #[error("failed to parse scenario: {0}")]
    Parse(String),

    #[error("scenario `{name}`: {source}")]
    Scenario {
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Attach a scenario name to an error bubbling out of a pipeline stage.
    pub fn in_scenario(self, name: &str) -> Error {
        Error::Scenario {
            name: name.to_string(),
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NotSquare { .. }
            | Error::DimensionMismatch { .. }
            | Error::InvalidValue { .. }
            | Error::NonFiniteEntry
            | Error::Parse(_) => ErrorKind::Validation,
            Error::Io { .. } => ErrorKind::Io,
            Error::Scenario { source, .. } => source.kind(),
            _ => ErrorKind::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
