use altserve_core::Error as CoreError;

/// Failure with the process exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad input: exit code 2.
    #[error("{0}")]
    Spec(String),
    /// Solver or simulation failure: exit code 3.
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn spec(msg: impl Into<String>) -> Self {
        CliError::Spec(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Spec(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NumericFailure(_) | CoreError::Inconsistent(_) | CoreError::InsufficientRun(_) => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Spec(e.to_string()),
        }
    }
}
