use thiserror::Error;

/// Errors produced by graph construction, transformations and the spectral solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input data violates a structural invariant.
    #[error("validation failed: {0}")]
    Validation(String),

    /// A numeric argument lies outside the admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An operation was called on data that does not satisfy its precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported merge: {0}")]
    UnsupportedMerge(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The requested energy sits on (or numerically next to) an eigenvalue.
    #[error("ambiguous count at k = {k}: an eigenphase is within {tol:e} of zero; perturb the energy")]
    AmbiguousCount { k: f64, tol: f64 },

    #[error("numerical consistency failure: {0}")]
    Numerical(String),

    #[error("root refinement failed: {0}")]
    Refinement(String),

    /// A query reached beyond the range in which a spectrum is known to be complete.
    #[error("outside certified range: {0}")]
    Completeness(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by malformed or invalid input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::Domain(_)
                | Error::Precondition(_)
                | Error::UnsupportedMerge(_)
                | Error::Unsupported(_)
                | Error::Parse(_)
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
