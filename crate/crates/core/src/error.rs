use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("insufficient data: buffer holds {have} transitions, batch needs {need}")]
    InsufficientData { have: usize, need: usize },

    #[error("grid oracle would need {count} evaluations, above the cap of {cap}")]
    BudgetExceeded { count: u128, cap: u128 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), message: message.into() }
    }

    /// Short category label used for CLI exit messages.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse",
            Error::Validation { .. } => "validation",
            Error::Shape { .. } => "shape",
            Error::InsufficientData { .. } => "insufficient-data",
            Error::BudgetExceeded { .. } => "budget",
            Error::Io(_) => "io",
            Error::Json(_) => "parse",
        }
    }
}
