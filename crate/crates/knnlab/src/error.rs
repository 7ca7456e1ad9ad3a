use thiserror::Error;

/// Crate-wide error type.
///
/// The variants map onto the CLI's exit codes: config errors exit 1, data and
/// I/O errors exit 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Bad flag combination, malformed config file, unknown config key.
    #[error("config error: {0}")]
    Config(String),

    /// A file exists but its contents are not what the format requires
    /// (wrong magic, truncation, inconsistent header).
    #[error("data error: {0}")]
    Data(String),

    /// An operation was called with arguments that violate its contract
    /// (e.g. more clusters than points, zero-length corpus).
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for this error per the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            _ => 2,
        }
    }
}
