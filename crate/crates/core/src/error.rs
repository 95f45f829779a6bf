use thiserror::Error;

/// Errors raised by the numerical core.
///
/// Solver outcomes such as blow-up or a singular frozen system are not errors;
/// they are reported through status fields on the result types.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("grid needs at least 4 nodes per axis, got {0}")]
    TooFewNodes(usize),

    #[error("grid function does not belong to this grid")]
    GridMismatch,

    #[error("grid function has {got} values, grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value at node {0}")]
    NonFinite(usize),

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("invalid ellipticity parameters: {0}")]
    InvalidParams(String),

    #[error("operator {member}: {message}")]
    InvalidOperator { member: usize, message: String },

    #[error("coefficient bound violated by member {member} at node {node}: {message}")]
    CoefficientBound {
        member: usize,
        node: usize,
        message: String,
    },

    #[error("mesh too coarse for the drift bound: h*delta1 = {value} exceeds 2*gamma = {limit}")]
    Cfl { value: f64, limit: f64 },

    #[error("{context}: {message}")]
    Solver {
        context: &'static str,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn solver_error(context: &'static str, message: impl Into<String>) -> Error {
    Error::Solver {
        context,
        message: message.into(),
    }
}
