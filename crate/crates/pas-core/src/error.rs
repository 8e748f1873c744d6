use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Input that violates a documented precondition.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// Enumeration or search that would exceed a hard size guard.
    #[error("resource guard: {0}")]
    Guard(String),
    /// A randomized search ran out of attempts.
    #[error("exhausted: {0}")]
    Exhausted(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
