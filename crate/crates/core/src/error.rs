use thiserror::Error;

pub type Result<T, E = SpinnError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SpinnError {
    #[error("dimension mismatch in {op}: {left} vs {right}")]
    Dimension {
        op: &'static str,
        left: String,
        right: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("invalid transition sequence at index {index}: {reason}")]
    Validity {
        index: usize,
        reason: crate::transitions::Violation,
    },

    #[error("data error on line {line}: {message}")]
    Data { line: usize, message: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SpinnError {
    pub(crate) fn dims(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        SpinnError::Dimension {
            op,
            left: format!("{}x{}", left.0, left.1),
            right: format!("{}x{}", right.0, right.1),
        }
    }
}
