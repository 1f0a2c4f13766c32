use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("cannot parse `{0}` as an exact number")]
    Parse(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("degenerate: {0}")]
    Degenerate(String),
    /// A checked inequality or identity failed. Carries a JSON counterexample.
    #[error("assertion failed: {what}")]
    Assertion { what: String, report: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn assertion(what: impl Into<String>, report: impl Into<String>) -> Self {
        Error::Assertion {
            what: what.into(),
            report: report.into(),
        }
    }

    pub fn is_assertion(&self) -> bool {
        matches!(self, Error::Assertion { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
