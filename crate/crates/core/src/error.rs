//! Error taxonomy shared by every module in the crate.

use thiserror::Error;

/// Unified error type for all fallible operations.
#[derive(Debug, Clone, PartialEq, Error)]
#[non_exhaustive]
pub enum Error {
    /// A numeric argument fell outside the domain the operation requires
    /// (law parameter out of range, probability outside (0,1), and so on).
    #[error("domain error: {0}")]
    Domain(String),

    /// A law-specification string or a data file failed to parse.
    #[error("parse error: {0}")]
    Parse(String),

    /// The characteristic function of this law is not in the closed-form catalog.
    #[error("characteristic function unavailable for {0}")]
    UnsupportedCharFun(String),

    /// An operation that assumes a continuous law received a discrete one.
    #[error("continuity required: {0}")]
    ContinuityRequired(String),

    /// Matrix or vector dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// Closed-form moments of the requested order are not available for this law.
    #[error("moment unavailable: {0}")]
    MomentUnavailable(String),

    /// A sample was empty, too small, or constant where variation is required.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// Quotient of first-order expansions whose denominator has constant term zero.
    #[error("division by expansion with zero constant term")]
    DivisionByZeroConstant,
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
