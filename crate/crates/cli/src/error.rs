use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] busgcl::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) | CliError::Failed(_) => EXIT_RUNTIME,
        }
    }

    /// Configuration problems are usage errors; everything else from the
    /// engine is a runtime failure.
    pub fn from_config(err: busgcl::Error) -> Self {
        match err {
            busgcl::Error::Config { .. } | busgcl::Error::Parse { .. } | busgcl::Error::InvalidArgument(_) => {
                CliError::Usage(err.to_string())
            }
            other => CliError::Runtime(other),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
