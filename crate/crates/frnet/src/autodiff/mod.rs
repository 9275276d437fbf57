//! Reverse-mode automatic differentiation over dense tensors, including the
//! gradient gate primitive.

mod gradcheck;
mod ops_conv;
mod ops_loss;
mod ops_norm;
mod tape;
mod tensor;

pub use gradcheck::{finite_difference_check, finite_difference_check_multi, DEFAULT_EPS};
pub use ops_loss::softmax_rows;
pub use ops_norm::BatchStats;
pub use tape::Tape;
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
