//! Dense feed-forward networks and their optimizers.

mod mlp;
mod optim;
pub mod snapshot;

pub use mlp::{Activation, DenseLayer, MlpConfig, MlpNodes, MlpParams};
pub use optim::{adam_step, AdamState, OptimizerKind};

use thiserror::Error;

use crate::autodiff::AutodiffError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("input shape {shape:?} does not match network input width {expected}")]
    InputWidth { expected: usize, shape: Vec<usize> },
    #[error("gradient and parameter shapes disagree")]
    ShapeMismatch,
    #[error("non-finite gradient; update refused")]
    NonFiniteGradient,
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}
