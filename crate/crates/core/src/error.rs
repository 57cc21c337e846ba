use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A transition label could not be matched to eigenstates.
    #[error("identification error: {0}")]
    Identification(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("fit error: {message} (iterations: {iterations}, residual: {residual:.6e})")]
    Fit {
        message: String,
        iterations: usize,
        residual: f64,
    },

    /// The tomography input states do not span the operator space.
    #[error("span error: {0}")]
    Span(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("runtime error: {0}")]
    Runtime(String),
}

/// A located error from the program parser.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "parse error at line {}, column {}: {}",
            self.line, self.column, self.message
        )
    }
}
