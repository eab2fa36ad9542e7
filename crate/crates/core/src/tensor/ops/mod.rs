//! Differentiable primitives. Every op validates shapes, computes its
//! forward values eagerly and registers a backward closure when needed.

mod conv;
mod elementwise;
mod linalg;
mod loss;
mod norm;
mod pool;
mod reduce;
mod resize;
mod shape;

pub use conv::conv2d;
pub use elementwise::{add, add_scalar, div, gelu, mul, mul_scalar, relu, sub};
pub use linalg::matmul;
pub use loss::{cross_entropy_with_logits, softmax};
pub use norm::{batch_norm_2d, layer_norm_channels, BatchNormStats};
pub use pool::{adaptive_max_pool_2d, max_pool_2d};
pub use reduce::{mean_all, sum_all, sum_axes};
pub use resize::bilinear_resize;
pub use shape::{concat, permute, reshape, transpose};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub(crate) fn expect_rank(op: &'static str, t: &Tensor, rank: usize) -> Result<()> {
    if t.ndim() != rank {
        return Err(Error::dim(op, format!("expected rank {rank}, got shape {:?}", t.shape())));
    }
    Ok(())
}

pub(crate) fn nchw(op: &'static str, t: &Tensor) -> Result<(usize, usize, usize, usize)> {
    expect_rank(op, t, 4)?;
    let s = t.shape();
    Ok((s[0], s[1], s[2], s[3]))
}
