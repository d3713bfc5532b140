//! Tape-based reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! Gradients are computed by recording their own primitive operations on the
//! same tape, so a gradient can be differentiated again (double backprop).
//! This is what lets a discriminator be trained on an objective that contains
//! the norm of its own input gradient.

mod array;
mod primitive;
mod tape;

pub use array::Array;
pub use primitive::Primitive;
pub(crate) use primitive::sigmoid;
#[cfg(test)]
use primitive::softplus;
pub use tape::{GradRequest, Gradients, NodeId, Tape};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutodiffError {
    #[error("{primitive}: incompatible input shapes {shapes:?}")]
    ShapeMismatch {
        primitive: &'static str,
        shapes: Vec<Vec<usize>>,
    },
    #[error("{primitive}: expected {expected} inputs, got {got}")]
    Arity {
        primitive: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{primitive}: index {index} out of range for length {len}")]
    IndexOutOfRange {
        primitive: &'static str,
        index: usize,
        len: usize,
    },
    #[error("array of shape {shape:?} needs {expected} values, got {got}")]
    BadArray {
        shape: Vec<usize>,
        expected: usize,
        got: usize,
    },
    #[error("gradient output must be scalar, got shape {0:?}")]
    NonScalarOutput(Vec<usize>),
    #[error("node {0} is not on this tape")]
    UnknownNode(usize),
}
