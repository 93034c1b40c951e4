use thiserror::Error;

/// Crate-wide error type.
///
/// The CLI maps `Config` to exit code 2 and everything else to exit code 3,
/// so constructors should pick the variant by who is at fault: the
/// configuration file, the caller, or the run itself.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration (bad file, bad value, mismatched
    /// checkpoint).
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside a function's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An API called in a state it does not support (e.g. stepping a finished
    /// environment).
    #[error("usage error: {0}")]
    Usage(String),

    /// Training failed at runtime (non-finite loss or gradients).
    #[error("training error: {0}")]
    Training(String),

    /// Malformed or incompatible checkpoint data.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
