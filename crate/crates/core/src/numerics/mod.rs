//! Dense tensors, reverse-mode differentiation and the SGD optimizer.

mod float;
pub(crate) mod ops;
mod optim;
mod tensor;

pub use float::{DType, Float};
pub use ops::broadcast_shape;
pub use optim::{sgd_step, Parameter};
pub use tensor::{is_grad_enabled, no_grad, Tensor};
