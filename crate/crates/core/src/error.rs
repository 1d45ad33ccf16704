use std::fmt;

/// Syntax error with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            line,
            col,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("syntax error at {0}")]
    Parse(#[from] ParseError),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("no successor-state axiom for fluent `{0}`")]
    MissingSsa(String),
    #[error("arity mismatch for `{name}`: expected {expected}, found {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("partition violation: {0}")]
    PartitionViolation(String),
    #[error("probability error: {0}")]
    Probability(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded: {0}")]
    Unbounded(String),
    #[error("numerical instability: {0}")]
    Numerical(String),
    #[error("iteration cap of {0} exceeded")]
    IterationCap(usize),
    #[error("state cap of {0} exceeded")]
    StateCap(usize),
    #[error("no ground action could be scored")]
    NoAction,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical solvers rather than of the input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::Infeasible
                | Error::Unbounded(_)
                | Error::Numerical(_)
                | Error::IterationCap(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
