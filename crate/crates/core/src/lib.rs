//! Sparsity-preserving adapters for pruned linear layers.
//!
//! A pruned weight `W~` keeps its zeros through fine-tuning when the trainable
//! branch is multiplicative: `W~ ⊙ repeat(α) ⊙ β`. This crate provides the
//! pruning masks, the adapter (and a LoRA baseline for contrast), a small
//! training loop and a checkpoint format to tie them together.

pub mod adapters;
pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod numerics;
pub mod pruning;
pub mod training;

pub use error::{Result, SppError};
