use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not anti-Hermitian (defect {defect:.3e})")]
    NotAntiHermitian { defect: f64 },

    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("matrix is not unitary (defect {defect:.3e})")]
    NotUnitary { defect: f64 },

    #[error("retraction point is rank deficient (smallest singular value {smallest:.3e})")]
    SingularRetraction { smallest: f64 },

    #[error("invalid layer topology: {0}")]
    InvalidTopology(String),

    #[error("invalid lattice geometry: {0}")]
    InvalidGeometry(String),

    #[error("splitting method `{method}` has {method_partitions} partitions, geometry needs {geometry_partitions}")]
    IncompatibleSplitting {
        method: String,
        method_partitions: usize,
        geometry_partitions: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("linear algebra routine failed: {0}")]
    Decomposition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
