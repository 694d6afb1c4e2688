use thiserror::Error;

/// Errors raised anywhere in the simulation stack.
#[derive(Debug, Error)]
pub enum Error {
    /// A value outside the documented domain of a routine.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration that cannot be turned into a runnable scenario.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("integration failed at step {step} (t = {time:.6e} s): {reason}")]
    Integration {
        step: usize,
        time: f64,
        reason: String,
    },

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("gradient undefined: {0}")]
    Gradient(String),

    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),

    #[error("reconstruction failed: {0}")]
    Reconstruction(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Config(_) => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
