//! Tensors, reverse-mode autodiff, and the raw numeric kernels behind the
//! networks.

pub mod conv;
pub mod gradcheck;
pub mod init;
pub mod tape;
pub mod tensor;

pub use tape::{Grads, Tape, Var};
pub use tensor::Tensor;
