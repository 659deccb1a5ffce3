//! Dense matrices, seeded randomness and tensor checkpoints.

pub mod alloc_track;
mod matrix;
mod rng;
pub mod store;

pub use matrix::Matrix;
pub use rng::Rng;
pub use store::{DType, Tensor, TensorStore};

pub(crate) use matrix::dot;
