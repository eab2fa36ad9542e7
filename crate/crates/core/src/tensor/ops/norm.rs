use std::cell::RefCell;

use super::nchw;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Running statistics of a batch-norm layer.
#[derive(Debug, Clone)]
pub struct BatchNormStats {
    pub mean: RefCell<Vec<f64>>,
    pub var: RefCell<Vec<f64>>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNormStats {
    pub fn new(channels: usize) -> Self {
        BatchNormStats {
            mean: RefCell::new(vec![0.0; channels]),
            var: RefCell::new(vec![1.0; channels]),
            momentum: 0.1,
            eps: 1e-5,
        }
    }
}

fn check_affine(op: &'static str, c: usize, gamma: &Tensor, beta: &Tensor) -> Result<()> {
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(Error::dim(
            op,
            format!("affine params {:?}/{:?} do not match {c} channels", gamma.shape(), beta.shape()),
        ));
    }
    Ok(())
}

/// Batch norm over `(B, H, W)` per channel. In training mode batch
/// statistics are used and the running estimates updated (unbiased
/// variance); in eval mode the running estimates are used.
pub fn batch_norm_2d(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    stats: &BatchNormStats,
    training: bool,
) -> Result<Tensor> {
    let (b, c, h, w) = nchw("batch_norm_2d", x)?;
    check_affine("batch_norm_2d", c, gamma, beta)?;
    if stats.mean.borrow().len() != c {
        return Err(Error::dim("batch_norm_2d", "running stats size mismatch"));
    }
    let hw = h * w;
    let count = (b * hw) as f64;
    let xd = x.data();
    let plane = |bi: usize, ci: usize| &xd[(bi * c + ci) * hw..(bi * c + ci + 1) * hw];

    let (mean, var): (Vec<f64>, Vec<f64>) = if training {
        let mut mean = vec![0.0; c];
        let mut var = vec![0.0; c];
        for ci in 0..c {
            let s: f64 = (0..b).map(|bi| plane(bi, ci).iter().sum::<f64>()).sum();
            mean[ci] = s / count;
            let ss: f64 = (0..b).map(|bi| plane(bi, ci).iter().map(|v| (v - mean[ci]).powi(2)).sum::<f64>()).sum();
            var[ci] = ss / count;
        }
        let mut rm = stats.mean.borrow_mut();
        let mut rv = stats.var.borrow_mut();
        let unbias = if count > 1.0 { count / (count - 1.0) } else { 1.0 };
        for ci in 0..c {
            rm[ci] = (1.0 - stats.momentum) * rm[ci] + stats.momentum * mean[ci];
            rv[ci] = (1.0 - stats.momentum) * rv[ci] + stats.momentum * var[ci] * unbias;
        }
        (mean, var)
    } else {
        (stats.mean.borrow().clone(), stats.var.borrow().clone())
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + stats.eps).sqrt()).collect();

    let mut xhat = vec![0.0; x.numel()];
    let mut out = vec![0.0; x.numel()];
    for bi in 0..b {
        for ci in 0..c {
            let off = (bi * c + ci) * hw;
            let (g, be) = (gamma.data()[ci], beta.data()[ci]);
            for i in off..off + hw {
                let xh = (xd[i] - mean[ci]) * inv_std[ci];
                xhat[i] = xh;
                out[i] = g * xh + be;
            }
        }
    }

    Tensor::from_op("batch_norm_2d", out, x.shape().to_vec(), &[x, gamma, beta], move |ctx| {
        let dy = ctx.grad;
        let gamma = ctx.inputs[1].data();
        let mut dgamma = vec![0.0; c];
        let mut dbeta = vec![0.0; c];
        for bi in 0..b {
            for ci in 0..c {
                let off = (bi * c + ci) * hw;
                for i in off..off + hw {
                    dgamma[ci] += dy[i] * xhat[i];
                    dbeta[ci] += dy[i];
                }
            }
        }
        let dx = ctx.inputs[0].requires_grad().then(|| {
            let mut dx = vec![0.0; dy.len()];
            for bi in 0..b {
                for ci in 0..c {
                    let off = (bi * c + ci) * hw;
                    for i in off..off + hw {
                        dx[i] = if training {
                            // dxhat = dy * gamma; sums over the channel are
                            // gamma * dbeta and gamma * dgamma.
                            gamma[ci] * inv_std[ci] / count * (count * dy[i] - dbeta[ci] - xhat[i] * dgamma[ci])
                        } else {
                            dy[i] * gamma[ci] * inv_std[ci]
                        };
                    }
                }
            }
            dx
        });
        vec![dx, Some(dgamma), Some(dbeta)]
    })
}

/// Layer norm across channels at every spatial position of `[B,C,H,W]`,
/// with a per-channel affine.
#[allow(clippy::needless_range_loop)]
pub fn layer_norm_channels(x: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<Tensor> {
    let (b, c, h, w) = nchw("layer_norm_channels", x)?;
    check_affine("layer_norm_channels", c, gamma, beta)?;
    let hw = h * w;
    let xd = x.data();
    let n = c as f64;
    let mut xhat = vec![0.0; x.numel()];
    let mut inv_std = vec![0.0; b * hw];
    let mut out = vec![0.0; x.numel()];
    for bi in 0..b {
        let base = bi * c * hw;
        for p in 0..hw {
            let mut mean = 0.0;
            for ci in 0..c {
                mean += xd[base + ci * hw + p];
            }
            mean /= n;
            let mut var = 0.0;
            for ci in 0..c {
                var += (xd[base + ci * hw + p] - mean).powi(2);
            }
            let is = 1.0 / (var / n + eps).sqrt();
            inv_std[bi * hw + p] = is;
            for ci in 0..c {
                let i = base + ci * hw + p;
                xhat[i] = (xd[i] - mean) * is;
                out[i] = gamma.data()[ci] * xhat[i] + beta.data()[ci];
            }
        }
    }
    Tensor::from_op("layer_norm_channels", out, x.shape().to_vec(), &[x, gamma, beta], move |ctx| {
        let dy = ctx.grad;
        let gamma = ctx.inputs[1].data();
        let mut dgamma = vec![0.0; c];
        let mut dbeta = vec![0.0; c];
        let mut dx = vec![0.0; dy.len()];
        for bi in 0..b {
            let base = bi * c * hw;
            for p in 0..hw {
                let mut s1 = 0.0;
                let mut s2 = 0.0;
                for ci in 0..c {
                    let i = base + ci * hw + p;
                    dgamma[ci] += dy[i] * xhat[i];
                    dbeta[ci] += dy[i];
                    let dxh = dy[i] * gamma[ci];
                    s1 += dxh;
                    s2 += dxh * xhat[i];
                }
                let is = inv_std[bi * hw + p];
                for ci in 0..c {
                    let i = base + ci * hw + p;
                    let dxh = dy[i] * gamma[ci];
                    dx[i] = is / n * (n * dxh - s1 - xhat[i] * s2);
                }
            }
        }
        vec![Some(dx), Some(dgamma), Some(dbeta)]
    })
}
