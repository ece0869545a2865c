use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("zero denominator in ratio estimate")]
    ZeroDenominator,

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("ascent violated at iteration {iteration}: ratio fell from {before} to {after}")]
    AscentViolation { iteration: usize, before: f64, after: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}
