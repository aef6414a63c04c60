//! Crate-wide error type.

use num_complex::Complex64;

/// Everything that can go wrong inside the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A vector or matrix entry was NaN or infinite where finite data is
    /// required.
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    /// An operation received an empty vector or matrix.
    #[error("empty input: {context}")]
    EmptyInput { context: &'static str },

    /// Dimensions of the operands do not line up.
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    /// A matrix handed to the Hermitian solver was not Hermitian.
    #[error("matrix is not Hermitian (max asymmetry {max_asymmetry:.3e})")]
    NotHermitian { max_asymmetry: f64 },

    /// Cholesky factorization hit a non-positive pivot; the matrix is not
    /// positive definite (numerically singular).
    #[error("matrix is not positive definite at pivot {pivot}")]
    NotPositiveDefinite { pivot: usize },

    /// The exact-MMSE system matrix could not be inverted on one subchannel.
    #[error("singular detection matrix on subchannel {subchannel} (pivot {pivot})")]
    SingularSubchannel { subchannel: usize, pivot: usize },

    /// A per-input detection gain collapsed to (numerical) zero, so
    /// normalized decisions are meaningless.
    #[error(
        "degenerate detection gain for input {input} at iteration {iteration} \
         (|gamma| = {magnitude:.3e} below threshold {threshold:.3e})"
    )]
    DegenerateGain {
        input: usize,
        iteration: usize,
        magnitude: f64,
        threshold: f64,
    },

    /// Bit buffer length is not compatible with the constellation.
    #[error("bit count {got} is not a multiple of {expected_multiple}")]
    BitCount { expected_multiple: usize, got: usize },

    /// A value that should be 0 or 1 was something else.
    #[error("bit value {got} at index {index} is not 0 or 1")]
    InvalidBit { index: usize, got: u8 },

    /// A point handed to the demapper is not on the constellation lattice.
    #[error("point {}{:+}i is not on the {scheme} lattice", value.re, value.im)]
    OffLattice { value: Complex64, scheme: &'static str },

    /// Configuration or experiment-spec level validation failure.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Shorthand for configuration/validation errors.
    pub fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
