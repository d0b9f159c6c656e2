use thiserror::Error;

use crate::model::Coupling;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("cluster count k={k} must satisfy 1 <= k <= n and divide n={n}")]
    Unbalanced { n: usize, k: usize },

    #[error("coupling is not in the transportation polytope (marginal violation {violation:e}, tolerance {tol:e})")]
    Infeasible { violation: f64, tol: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sinkhorn did not reach marginal tolerance {tol:e} within {sweeps} sweeps (violation {violation:e})")]
    SinkhornNonConvergence {
        sweeps: usize,
        violation: f64,
        tol: f64,
        last: Box<Coupling>,
    },

    #[error("sinkhorn kernel under/overflow at lambda={lambda:e}; increase lambda")]
    KernelRange { lambda: f64 },

    #[error("dataset parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
