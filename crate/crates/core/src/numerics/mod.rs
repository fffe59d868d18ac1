//! Reverse-mode differentiation, gradient checking and the Adam optimizer.

mod adam;
mod gradcheck;
mod graph;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, GradCheckError, GradCheckReport};
pub use graph::{DualValue, Graph, Shape, Var};

use crate::signal::SignalError;

#[derive(Debug, thiserror::Error)]
pub enum NumericsError {
    #[error("{op} evaluated outside its domain at node {node}")]
    Domain { op: &'static str, node: usize },
    #[error("non-finite adjoint at node {node}, element {element}")]
    NonFiniteAdjoint { node: usize, element: usize },
    #[error("backward requires a scalar output, got {0}x{1}")]
    NotScalar(usize, usize),
    #[error(transparent)]
    Signal(#[from] SignalError),
}
