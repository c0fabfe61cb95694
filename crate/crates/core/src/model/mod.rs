//! Classification models, the proximal surrogate objective, the SGD local
//! solver and inexactness measurements.
//!
//! Both model kinds share one dense feed-forward implementation: multiclass
//! logistic regression is the network without hidden layers. The loss is the
//! mean softmax cross-entropy over a dataset.

mod checkpoint;
mod inexact;
mod network;
mod prox;
mod solver;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointMeta};
pub use inexact::{measure_gamma, measure_zeta, InexactnessReport, STATIONARY_REFERENCE_TOL};
pub use network::{logistic_smoothness, Activation, ModelKind, ModelSpec};
pub use prox::{local_grad, local_loss, local_loss_grad, prox_grad, prox_objective};
pub use solver::{local_solve_sgd, solve_prox_exact, OracleOptions, OracleSolution, ProxConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("local solver diverged in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("proximal oracle failed to converge: gradient norm {grad_norm:e} after {iterations} iterations")]
    OracleFailed { grad_norm: f64, iterations: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint metadata: {0}")]
    Json(#[from] serde_json::Error),
}
