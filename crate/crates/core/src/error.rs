use thiserror::Error;

pub type Result<T> = std::result::Result<T, DadaError>;

#[derive(Debug, Error)]
pub enum DadaError {
    /// Operand shapes are incompatible for the named operation.
    #[error("{op}: dimension mismatch between {left:?} and {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    /// An input lies outside the numeric domain of an operation.
    #[error("{op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// A precondition of the caller was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A loss term evaluated to NaN or infinity during training.
    #[error("non-finite value in loss term `{term}`")]
    NonFinite { term: &'static str },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DadaError {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        DadaError::Contract(msg.into())
    }
}
