use thiserror::Error;

use crate::expr::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data is malformed (non-finite samples, wrong lengths).
    #[error("data error: {0}")]
    Data(String),

    /// A self-composition left the interval under the strict policy.
    #[error("range error: composed argument left the interval at nodes {nodes:?}")]
    Range { nodes: Vec<usize> },

    /// Two grid functions that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Expr(#[from] ExprError),

    /// Expression evaluation failed at a specific sample point.
    #[error("evaluation of `{name}` failed at s = {s}, v = {v}, w = {w}: {source}")]
    EvalAt {
        name: String,
        s: f64,
        v: f64,
        w: f64,
        #[source]
        source: ExprError,
    },

    /// The pointwise implicit solve did not reach its tolerance.
    #[error("implicit solve did not converge after {iterations} iterations (residual {residual:e})")]
    ImplicitSolve { iterations: usize, residual: f64 },

    /// A monotone iterate broke the expected pointwise ordering.
    #[error("ordering violated at step {t}, node {node}: {relation} off by {magnitude:e}")]
    Ordering {
        t: usize,
        node: usize,
        relation: String,
        magnitude: f64,
    },

    /// The initial pair is not a mixed lower/upper pair.
    #[error("initial pair fails the mixed lower/upper conditions: {0}")]
    Precondition(String),

    /// The oracle refused to produce a reference result.
    #[error("oracle error: {0}")]
    Oracle(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
