use thiserror::Error;

/// Errors raised by the toolkit.
///
/// `Usage` and `Config` map to exit status 2 in the command-line runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

pub(crate) fn check_dim(expected: usize, got: usize, what: &str) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(usage(format!(
            "{what} has dimension {got}, expected {expected}"
        )))
    }
}
