use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("indeterminate extended-real form (+inf) + (-inf)")]
    Indeterminate,

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("LP cap exceeded: {atoms} atoms in union support, cap is {cap}")]
    LpCapExceeded { atoms: usize, cap: usize },

    #[error("LP infeasible")]
    LpInfeasible,

    #[error("LP unbounded")]
    LpUnbounded,

    #[error("set is empty at the given parameter")]
    EmptySet,

    #[error("non-finite integrand value {value} at atom {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("insufficient evidence: {0}")]
    InsufficientEvidence(String),

    #[error("unknown claim key `{0}`")]
    UnknownClaim(String),

    #[error("report has no values in column `{0}`")]
    MissingColumn(String),
}
