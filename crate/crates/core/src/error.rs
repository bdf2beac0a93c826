use alloc::string::String;

/// Errors raised by the numeric core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Two operands have incompatible shapes.
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        /// Operation that rejected the shapes.
        op: &'static str,
        /// Shape of the left operand (rows, cols).
        left: (usize, usize),
        /// Shape of the right operand (rows, cols).
        right: (usize, usize),
    },
    /// Two sequences have different lengths.
    #[error("length mismatch in {op}: {left} vs {right}")]
    Length {
        /// Operation that rejected the lengths.
        op: &'static str,
        /// First length.
        left: usize,
        /// Second length.
        right: usize,
    },
    /// A softmax row has no admissible entry.
    #[error("row {row} has an empty neighborhood")]
    DegenerateNeighborhood {
        /// Offending row.
        row: usize,
    },
    /// A scalar argument is outside its domain.
    #[error("invalid argument {name}: {reason}")]
    InvalidArgument {
        /// Argument name.
        name: &'static str,
        /// Why it was rejected.
        reason: String,
    },
    /// Training produced a non-finite loss.
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {loss}")]
    NonFiniteLoss {
        /// Zero-based epoch.
        epoch: usize,
        /// Zero-based batch index within the epoch.
        batch: usize,
        /// The offending value.
        loss: f64,
    },
}

/// Result alias for the core crate.
pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument { name, reason: reason.into() }
    }
}
