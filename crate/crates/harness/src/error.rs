use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Unreadable, malformed or invalid configuration or input file.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] adaconv_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A verification ran to completion and found a violated claim.
    #[error("verification failed: {0}")]
    Verification(String),
}

impl HarnessError {
    /// Process exit code: 2 for bad input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}
