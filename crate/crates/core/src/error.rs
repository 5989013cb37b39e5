use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("value {value} is outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("no permutation of {n} elements displaces exactly {h} of them")]
    InvalidDisplacement { n: usize, h: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("Hessian is numerically singular (rank-deficient design?)")]
    SingularHessian,

    #[error("matrix is rank deficient: {0}")]
    RankDeficient(&'static str),

    #[error("observation mask has no observed entries")]
    EmptyMask,

    #[error("mask entry at ({row}, {col}) is {value}, expected 0 or 1")]
    InvalidMask { row: usize, col: usize, value: f64 },

    #[error("column {column}: {source}")]
    Column {
        column: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid setting: {0}")]
    InvalidSetting(String),
}

impl Error {
    pub(crate) fn in_column(self, column: usize) -> Self {
        Error::Column {
            column,
            source: Box::new(self),
        }
    }
}
