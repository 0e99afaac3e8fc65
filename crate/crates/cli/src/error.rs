use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid scenario: {field}: {message}")]
    Schema { field: String, message: String },

    #[error("case mismatch: {0}")]
    CaseMismatch(String),

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Schema {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Schema { .. } => 2,
            CliError::CaseMismatch(_) => 3,
        }
    }
}
