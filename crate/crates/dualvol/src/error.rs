//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid body: {0}")]
    InvalidBody(String),

    #[error("unsupported composition: {0}")]
    UnsupportedComposition(String),

    #[error("singular transform (condition number above 1e12)")]
    SingularTransform,

    #[error("body generation failed: {0}")]
    GenerationFailed(String),

    #[error("iteration limit exceeded: {0}")]
    IterationLimit(String),

    #[error("bad quadrature scheme: {0}")]
    BadScheme(String),

    #[error("non-finite integrand at node {index}")]
    NonFiniteIntegrand { index: usize },

    #[error("non-finite value: {0}")]
    NonFiniteValue(String),

    #[error("exponent q = {q} out of range for dimension n = {n} (requires q < n)")]
    ExponentOutOfRange { q: f64, n: usize },

    #[error("layer-cake grid too coarse: error estimate {estimate:.3e} exceeds tolerance {tol:.3e}")]
    GridTooCoarse { estimate: f64, tol: f64 },

    #[error("degenerate span: points or directions do not span the ambient space")]
    DegenerateSpan,

    #[error("no contact points found within tolerance")]
    NoContacts,

    #[error("body is not in John position: {0}")]
    NotInJohnPosition(String),

    #[error("linear program failed: {0}")]
    LpFailure(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
