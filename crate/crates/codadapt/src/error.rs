use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A signal has no usable content for the requested operation
    /// (zero energy in a window, constant samples, zero-norm row).
    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    /// An index, lag, or window falls outside the signal.
    #[error("out of range: {0}")]
    Range(String),

    /// Invalid configuration or arguments.
    #[error("validation error: {0}")]
    Validation(String),

    /// A file or archive does not match the documented format.
    #[error("format error: {0}")]
    Format(String),

    /// Non-finite values or other numeric failures.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 for validation errors, 2 for
    /// runtime/numeric/format/io failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
