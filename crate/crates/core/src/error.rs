use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Operand dimensions do not fit together.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A configured size cap would be exceeded.
    #[error("size limit exceeded: {0}")]
    Size(String),
    /// An input violates an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    /// A numerical procedure failed to produce a finite result.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! shape_err {
    ($($arg:tt)*) => { $crate::error::Error::Shape(format!($($arg)*)) };
}
macro_rules! contract_err {
    ($($arg:tt)*) => { $crate::error::Error::Contract(format!($($arg)*)) };
}
pub(crate) use contract_err;
pub(crate) use shape_err;
