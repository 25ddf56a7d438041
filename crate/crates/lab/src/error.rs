use std::fmt;

/// One problem with one config field.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("invalid config: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    ConfigInvalid(Vec<Diagnostic>),
    #[error("config parse: {0}")]
    Parse(String),
    #[error(transparent)]
    Core(#[from] magsle_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
