//! Error type shared across the crate.

/// Errors produced by model construction, posterior updates, and planners.
#[derive(Debug, thiserror::Error)]
pub enum EarlyBirdError {
    /// An argument lies outside the domain a routine supports.
    #[error("domain error: {0}")]
    Domain(String),

    /// Every unit of population mass has failed, so the requested
    /// conditional quantity does not exist.
    #[error("population extinct: {0}")]
    Extinct(String),

    /// The requested computation is valid but not implemented for these
    /// inputs (for example, exhaustive decision-rule search at large depth).
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Convenience alias used by every fallible routine in the crate.
pub type Result<T> = std::result::Result<T, EarlyBirdError>;

pub(crate) fn domain(msg: impl Into<String>) -> EarlyBirdError {
    EarlyBirdError::Domain(msg.into())
}

pub(crate) fn extinct(msg: impl Into<String>) -> EarlyBirdError {
    EarlyBirdError::Extinct(msg.into())
}

pub(crate) fn unsupported(msg: impl Into<String>) -> EarlyBirdError {
    EarlyBirdError::Unsupported(msg.into())
}
