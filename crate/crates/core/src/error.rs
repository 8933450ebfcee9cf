use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not agree.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    /// A documented precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),
    /// A numerical kernel failed (eigensolver non-convergence, indefinite system, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// The leading eigenpair of the zero matrix is undefined.
    #[error("no leading eigenpair: matrix is zero")]
    NoLeadingEigenpair,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
