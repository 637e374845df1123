use std::fmt;

use mbtree_core::Error as CoreError;

/// Failure classes with their process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    General = 1,
    FamilySpec = 2,
    ImpossibleConditioning = 3,
    ResourceCap = 4,
    Io = 5,
    AcceptanceFailed = 6,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
        }
    }

    pub fn general(message: impl Into<String>) -> Self {
        Self::new(Kind::General, message)
    }

    pub fn spec(message: impl Into<String>) -> Self {
        Self::new(Kind::FamilySpec, message)
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let kind = match e {
            CoreError::FamilySpec(_) => Kind::FamilySpec,
            CoreError::ImpossibleConditioning(_) => Kind::ImpossibleConditioning,
            CoreError::ResourceCap(_) | CoreError::SizeCap { .. } => Kind::ResourceCap,
            _ => Kind::General,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(Kind::Io, e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::general(format!("JSON: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
