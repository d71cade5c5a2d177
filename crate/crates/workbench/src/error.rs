use thiserror::Error;

/// Errors of the workbench layer; core errors pass through unchanged.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WbError {
    #[error(transparent)]
    Core(#[from] cnu_core::Error),
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("no transition has positive success probability under the belief")]
    NoFireableBelief,
    #[error("observer `{observer}` may not fire `{transition}`")]
    Forbidden { observer: String, transition: String },
    #[error("time budget exhausted")]
    Timeout,
    #[error("unknown net `{0}`")]
    UnknownNet(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("malformed request: {0}")]
    BadRequest(String),
}

impl WbError {
    pub fn code(&self) -> &'static str {
        match self {
            WbError::Core(e) => e.code(),
            WbError::InvalidParams(_) => "InvalidParams",
            WbError::NoFireableBelief => "NoFireableBelief",
            WbError::Forbidden { .. } => "Forbidden",
            WbError::Timeout => "Timeout",
            WbError::UnknownNet(_) => "UnknownNet",
            WbError::UnknownSession(_) => "UnknownSession",
            WbError::BadRequest(_) => "BadRequest",
        }
    }
}

impl From<serde_json::Error> for WbError {
    fn from(e: serde_json::Error) -> Self {
        WbError::Core(e.into())
    }
}

pub type WbResult<T> = Result<T, WbError>;
