//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A model failed validation (non-Hermitian Hamiltonian, dimension
    /// mismatch, non-finite entries, ...).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// An argument is outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The generator has more than one stationary state; carries the
    /// dimension of the null space that was found.
    #[error("equilibrium state is not unique (null space dimension {dim})")]
    NonUniqueEquilibrium { dim: usize },

    /// A truncated expansion could not reach the requested tolerance.
    #[error("accuracy not reached: achieved bound {achieved:.3e}, required {required:.3e}")]
    Accuracy { achieved: f64, required: f64 },

    /// A simulation ran into floating-point trouble (trace underflow).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A run configuration is inconsistent with the requested statistic.
    #[error("configuration error: {0}")]
    Config(String),

    /// A model or record document could not be parsed; the message carries
    /// the JSON path or line at fault.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
