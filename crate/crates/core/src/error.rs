//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A coordinate lies outside its site's range.
    #[error("coordinate {value} out of range for site {site} (size {size})")]
    CoordOutOfRange {
        site: usize,
        value: usize,
        size: usize,
    },

    /// A dense object would exceed the desk-scale state budget.
    #[error("capacity exceeded: {requested} states/operations, limit {limit}")]
    Capacity { requested: u128, limit: u128 },

    /// Two objects that must live on the same space do not.
    #[error("shape mismatch: expected {expected} states, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    /// A function argument has a negative entry where nonnegativity is required.
    #[error("negative entry {value} at state {index} where a nonnegative function is required")]
    NegativeEntry { index: usize, value: f64 },

    /// A function argument has a nonpositive entry where strict positivity is required.
    #[error("nonpositive entry {value} at state {index} where a strictly positive function is required")]
    NonpositiveEntry { index: usize, value: f64 },

    /// Conditioning on a configuration slice that carries no mass.
    #[error("conditioning slice at site {site} has zero mass (unsupported configuration)")]
    ZeroMassSlice { site: usize },

    /// A tilted measure or similar construction degenerated to zero normalization.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Structural validation failure (measures, models, covers, schemas).
    #[error("{0}")]
    Validation(String),

    /// Negative evolution time.
    #[error("evolution time must be nonnegative, got {0}")]
    NegativeTime(f64),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
