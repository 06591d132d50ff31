//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition (normalization, domain,
    /// parameter range).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Matrix or tensor dimensions do not match the operation.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A state with (numerically) zero norm cannot be normalized.
    #[error("degenerate branch: state norm {norm:.3e} below threshold")]
    DegenerateBranch { norm: f64 },

    /// Every branch weight of a channel vanished on the current state.
    #[error("degenerate channel: all branch weights below {0:.1e}")]
    DegenerateChannel(f64),

    /// A transformed partial trace acquired an eigenvalue below the
    /// tolerated floor, indicating a corrupted optimization context.
    #[error("numerical context error: eigenvalue {0:.3e} below -1e-10")]
    NumericalContext(f64),

    /// Steady-state detection failed: the series still drifts.
    #[error("series not converged: {0}")]
    NotConverged(String),

    /// Extrapolation found no zero crossing on the physical side.
    #[error("no transition: {0}")]
    NoTransition(String),

    /// A dense oracle was asked for a system too large to represent.
    #[error("system too large for dense oracle: {0} sites")]
    TooLarge(usize),

    /// State (de)serialization failure.
    #[error("state io: {0}")]
    StateIo(String),
}

pub type Result<T> = std::result::Result<T, Error>;
