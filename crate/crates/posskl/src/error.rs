use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("empty vector")]
    Empty,

    #[error("vector is not on the probability simplex (sum = {0})")]
    NotOnSimplex(f64),

    #[error("entries must be strictly positive")]
    NotStrictlyPositive,

    #[error("possibility distribution is not normalized (max entry must be 1)")]
    NotNormalized,

    #[error("non-finite value encountered")]
    NonFinite,

    #[error("index {0} out of range for length {1}")]
    IndexOutOfRange(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("empty support")]
    EmptySupport,

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("no feasible lattice point at the requested grid step")]
    NoFeasibleGridPoint,

    #[error("constraint set carries no possibility structure")]
    NoPossibilityStructure,

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("malformed data: {0}")]
    MalformedData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
