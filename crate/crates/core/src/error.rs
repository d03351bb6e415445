use thiserror::Error;

use crate::groupoid::Arrow;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape violation: {0}")]
    Shape(String),

    #[error("matrix entry at ({row},{col}) is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),

    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(String),

    #[error("arrows {left} and {right} are not composable")]
    NotComposable { left: Arrow, right: Arrow },

    #[error("enumeration over {n} points exceeds the cap of {cap}")]
    EnumerationCap { n: usize, cap: usize },

    #[error("bundle is not locally trivial: {0}")]
    LocalTriviality(String),

    #[error("invalid frame: {0}")]
    Frame(String),

    #[error("invalid twist: {0}")]
    Twist(String),

    #[error("covariance violation: {0}")]
    Covariance(String),

    #[error("not unitary: {0}")]
    NotUnitary(String),

    #[error("assignment does not define a diagonal-unitary twist: {0}")]
    NotATwist(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("support is not a partial bijection: {0}")]
    SupportViolation(String),

    #[error("not a partial isometry: {0}")]
    NotPartialIsometry(String),

    #[error("generator does not cover X x X; missing pairs {missing:?}")]
    IncompleteSupport { missing: Vec<Arrow> },

    #[error("embedding invariant is not orientable: {0}")]
    NotOrientable(String),

    #[error("bisection is not self-adjoint: {0}")]
    NotSelfAdjoint(String),

    #[error("invalid Fell bundle: {0}")]
    InvalidBundle(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    /// Wraps `self` with the name of the pipeline stage that produced it.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }
}
