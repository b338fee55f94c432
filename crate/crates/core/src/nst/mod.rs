//! Neural spacetime: encoder, neural quasi-metric and neural partial order.

mod activation;
mod bounds;
mod model;

pub use activation::{activation, order_violation, positive_invertible, precedes};
pub use bounds::{operator_norm_constant, triangle_constant};
pub use model::{
    Mlp, NeuralSpacetime, NstConfig, EXPONENT_FLOOR, LAMBDA_FLOOR, LAMBDA_INIT, LEAKY_SLOPE,
};

use crate::autodiff::AutodiffError;
use crate::checkpoint::CheckpointError;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NstError {
    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("time codes have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("expected a vector of length {expected}, got {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

pub type Result<T> = std::result::Result<T, NstError>;
