use thiserror::Error;

#[derive(Debug, Error)]
pub enum IlseError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("numeric failure in {op}: {detail}")]
    NumericFailure { op: String, detail: String },
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },
    #[error("search failure: {0}")]
    SearchFailure(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IlseError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(IlseError::InvalidArgument(msg.into()))
}

pub(crate) fn numeric(op: &str, detail: impl Into<String>) -> IlseError {
    IlseError::NumericFailure {
        op: op.to_string(),
        detail: detail.into(),
    }
}
