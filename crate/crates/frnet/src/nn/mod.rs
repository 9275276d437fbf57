//! Layer primitives: linear, convolution, normalization and parameter
//! initialization, built on the autodiff tape.

mod conv;
mod init;
mod linear;
mod norm;
pub mod suite;

pub use conv::Conv2d;
pub use init::{InitScheme, InitSpec};
pub use linear::Linear;
pub use norm::{BatchNorm2d, LayerNorm};

use crate::autodiff::Tensor;
use crate::scalar::Scalar;

/// Forward behavior switch. Only batch norm reacts to it: train mode uses
/// (and updates) batch statistics, eval mode applies the running estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A tensor with its checkpoint name. Non-trainable entries (batch-norm
/// running statistics) are saved and loaded but never step with the
/// optimizer and never count as parameters.
pub struct NamedTensor<S: Scalar> {
    pub name: String,
    pub tensor: Tensor<S>,
    pub trainable: bool,
}

impl<S: Scalar> NamedTensor<S> {
    pub fn new(name: impl Into<String>, tensor: Tensor<S>, trainable: bool) -> Self {
        NamedTensor { name: name.into(), tensor, trainable }
    }
}

/// Exact count of trainable scalars in a named-tensor collection.
pub fn count_trainable<S: Scalar>(tensors: &[NamedTensor<S>]) -> usize {
    tensors.iter().filter(|t| t.trainable).map(|t| t.tensor.numel()).sum()
}
