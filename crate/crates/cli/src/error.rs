use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, bad input file, missing input.
    #[error("{0}")]
    Input(String),

    #[error(transparent)]
    Core(#[from] ncac_core::Error),

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Core(ncac_core::Error::Capacity { .. }) => 3,
            CliError::Core(ncac_core::Error::Config(_) | ncac_core::Error::Input(_)) => 2,
            CliError::Core(_) | CliError::Internal(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Error for a JSON document that failed to parse. serde_json appends the line and column.
pub fn json_error(path: &str, e: &serde_json::Error) -> CliError {
    CliError::Input(format!("{path}: {e}"))
}
