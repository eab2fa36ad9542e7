//! Hybrid CNN-Transformer segmentation (U-shaped encoder/decoder with
//! efficient multi-head self-attention and 2-D relative position logits),
//! implemented from scratch on a small f64 reverse-mode autodiff engine.
//!
//! Module map:
//! - [`tensor`]: tensor value type, autodiff, primitive ops, gradient checks
//! - [`attention`]: standard, efficient and relative-position attention
//! - [`model`]: residual / transformer blocks and the full network
//! - [`synthdata`]: deterministic cardiac-like phantoms with vendor shifts
//! - [`train`]: losses, SGD, schedule and the training loop
//! - [`metrics`]: Dice, Hausdorff and the vendor robustness report
//! - [`bench`]: attention complexity benchmark
//! - [`cli`]: run configuration, ablation and gradient-check drivers

pub mod attention;
pub mod bench;
pub mod cli;
pub mod error;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod synthdata;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
