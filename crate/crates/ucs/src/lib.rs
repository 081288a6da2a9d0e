//! Std companion to `ucs-core`: dataset and result file formats, the
//! car-evaluation loader, a parallel experiment runner and the `ucs`
//! command-line tool.

pub mod car;
pub mod cli;
pub mod formats;
pub mod harness;

/// A failed command, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{flag}: {message}")]
    Data { flag: &'static str, message: String },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data { .. } => 2,
            CliError::Internal(_) => 3,
        }
    }
}
