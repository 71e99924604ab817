use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("exponent {0} is outside [1, inf]")]
    ExponentOutOfRange(f64),

    #[error("object belongs to a different measure space")]
    SpaceMismatch,

    #[error("invalid measure space: {0}")]
    InvalidSpace(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid self-map: {0}")]
    InvalidMap(String),

    #[error("function has {got} values but the space has {expected} atoms")]
    LengthMismatch { expected: usize, got: usize },

    #[error("function is not finite at atom {0}")]
    NonFinite(usize),

    #[error("function is not constant on the fiber over atom {atom}")]
    NotFiberConstant { atom: usize },

    #[error("operator needs at least one term")]
    NoTerms,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("region is empty")]
    EmptyRegion,

    #[error("self-map of term {term} is not a permutation, so it has no period")]
    Aperiodic { term: usize },

    #[error("W^{period} is not the multiplication operator M_v (residual {residual:e})")]
    PowerNotMultiplication { period: u64, residual: f64 },

    #[error("operator is not invertible")]
    NotInvertible,

    #[error("impossible generator configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True when a criterion's hypotheses fail, as opposed to bad input.
    pub fn is_hypothesis_failure(&self) -> bool {
        matches!(
            self,
            Error::Precondition(_)
                | Error::Aperiodic { .. }
                | Error::PowerNotMultiplication { .. }
                | Error::NotInvertible
        )
    }
}
