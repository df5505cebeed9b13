use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DosError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    /// A structural precondition of the threshold analysis does not hold.
    #[error("regularity condition violated ({condition}): {detail}")]
    Regularity {
        condition: &'static str,
        detail: String,
    },

    #[error("solver failure in {stage}: {detail}")]
    Solver { stage: &'static str, detail: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for DosError {
    fn from(e: std::io::Error) -> Self {
        DosError::Io(e.to_string())
    }
}

impl DosError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        DosError::InvalidParam {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn solver(stage: &'static str, detail: impl Into<String>) -> Self {
        DosError::Solver {
            stage,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, DosError>;
