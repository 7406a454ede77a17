use thiserror::Error;

/// Errors produced anywhere in the discretization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate parameterization point (|tangent| = {0:e})")]
    DegenerateParameterization(f64),

    #[error("insufficient nodes: {interior} interior nodes at spacing {spacing}")]
    InsufficientNodes { interior: usize, spacing: f64 },

    #[error("degenerate node set: nodes {0} and {1} coincide")]
    DegenerateNodeSet(usize, usize),

    #[error("evaluation set snapping exhausted for node {0}")]
    SnappingExhausted(usize),

    #[error("stencil larger than node set ({size} > {available})")]
    StencilTooLarge { size: usize, available: usize },

    #[error("stencil {stencil} is numerically singular (condition estimate {condition:e})")]
    SingularStencil { stencil: usize, condition: f64 },

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("singular right-hand side at {point:?}: {reason}")]
    SingularData {
        point: [f64; 3],
        reason: &'static str,
    },

    #[error("zero reference norm in relative error")]
    ZeroReference,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("factorization failed: {reason} (condition estimate {condition:e})")]
    Factorization { reason: String, condition: f64 },

    #[error("power iteration did not converge after {iterations} iterations (last estimate {estimate:e})")]
    NonConvergence { iterations: usize, estimate: f64 },

    #[error("dense size guard exceeded: {size} > {limit}")]
    SizeGuard { size: usize, limit: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{stage}: {inner}")]
    Stage {
        stage: &'static str,
        inner: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn at(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            inner: Box::new(self),
        }
    }
}
