use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite coordinate at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("basis of size {size} exceeds the guard of {limit}")]
    BasisTooLarge { size: usize, limit: usize },

    #[error("point cloud is not on the {surface} (max membership residual {residual:.3e})")]
    OffSurface { surface: String, residual: f64 },

    #[error("eigensolver failed to converge on a {dim}x{dim} matrix")]
    EigenSolver { dim: usize },

    #[error("singular value decomposition failed to converge on a {rows}x{cols} matrix")]
    Svd { rows: usize, cols: usize },

    #[error("ridge continuation did not converge (last two extrapolations {a:.6e}, {b:.6e})")]
    RidgeNonConvergence { a: f64, b: f64 },

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error("moment cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical routine, as opposed to bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenSolver { .. } | Error::Svd { .. } | Error::RidgeNonConvergence { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
