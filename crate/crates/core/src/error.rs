use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown domain id `{0}`")]
    UnknownDomain(String),

    #[error("malformed domain parameters: {0}")]
    BadParams(String),

    #[error("point lies outside triangle {tri}")]
    PointOutsideTriangle { tri: usize },

    #[error("field does not provide {0}; pass an analytic derivative instead")]
    MissingDerivative(&'static str),

    #[error("operation needs a {expected} space, got {got}")]
    WrongSpaceKind { expected: &'static str, got: &'static str },

    #[error("boundary tag selection references nonexistent edge {0}")]
    NoSuchEdge(usize),

    #[error("matrix is singular (pivot {pivot})")]
    SingularMatrix { pivot: usize },

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("eigensolver did not converge within {iterations} iterations (worst residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("triangle pair is not a parallelogram (mismatch {0:.3e})")]
    NotAParallelogram(f64),

    #[error("invalid extrapolation input: {0}")]
    BadExtrapolation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("reference eigenvalues unavailable: {0}")]
    MissingReference(String),

    #[error("memory budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
