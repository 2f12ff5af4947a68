use std::path::PathBuf;

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Inconsistent or malformed inputs (dimension mismatches, bad grids).
    #[error("configuration error: {0}")]
    Config(String),
    /// A mathematical precondition does not hold (singular system,
    /// non-terminating policy, non-ergodic chain).
    #[error("domain error: {0}")]
    Domain(String),
    /// An iterative method failed to reach its tolerance.
    #[error("numerical error: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },
    /// An operation was called in a state where it is not allowed.
    #[error("usage error: {0}")]
    Usage(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
