use crate::error::{Error, Result};
use crate::tensor::{ops, Tensor};

/// Smoothing added to both numerator and denominator of the soft Dice.
pub const DICE_EPS: f64 = 1e-5;

fn one_hot(op: &'static str, logits: &Tensor, labels: &[u8]) -> Result<Tensor> {
    let (b, k, h, w) = ops::nchw(op, logits)?;
    let hw = h * w;
    if labels.len() != b * hw {
        return Err(Error::dim(op, format!("{} labels for logits {:?}", labels.len(), logits.shape())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= k) {
        return Err(Error::Data(format!("label {bad} out of range for {k} classes")));
    }
    let mut y = vec![0.0; logits.numel()];
    for bi in 0..b {
        for p in 0..hw {
            y[(bi * k + labels[bi * hw + p] as usize) * hw + p] = 1.0;
        }
    }
    Tensor::new(y, logits.shape())
}

/// `1 - mean_c (2 Σ p_c y_c + ε) / (Σ p_c + Σ y_c + ε)` over the foreground
/// classes `c >= 1`, with `p = softmax(logits)` and sums taken over the whole
/// batch. `logits: [B, K, H, W]`, `labels`: `B*H*W` class ids.
pub fn dice_loss(logits: &Tensor, labels: &[u8]) -> Result<Tensor> {
    let y = one_hot("dice_loss", logits, labels)?;
    let k = logits.shape()[1];
    if k < 2 {
        return Err(Error::dim("dice_loss", "needs at least one foreground class"));
    }
    let p = ops::softmax(logits, 1)?;
    let inter = ops::sum_axes(&ops::mul(&p, &y)?, &[0, 2, 3])?;
    let psum = ops::sum_axes(&p, &[0, 2, 3])?;
    let ysum = ops::sum_axes(&y, &[0, 2, 3])?;
    let num = ops::add_scalar(&ops::mul_scalar(&inter, 2.0)?, DICE_EPS)?;
    let den = ops::add_scalar(&ops::add(&psum, &ysum)?, DICE_EPS)?;
    let dice = ops::div(&num, &den)?;
    let fg = k as f64 - 1.0;
    let weights = Tensor::from_fn(&[k], |c| if c == 0 { 0.0 } else { -1.0 / fg });
    ops::add_scalar(&ops::sum_all(&ops::mul(&dice, &weights)?)?, 1.0)
}

/// Dice loss plus pixel-mean cross-entropy, unit weights.
pub fn combined_loss(logits: &Tensor, labels: &[u8]) -> Result<Tensor> {
    let d = dice_loss(logits, labels)?;
    let ce = ops::cross_entropy_with_logits(logits, labels)?;
    ops::add(&d, &ce)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn saturated(labels: &[u8], k: usize, hw: usize) -> Tensor {
        Tensor::from_fn(&[1, k, 1, hw], |i| if labels[i % hw] as usize == i / hw { 20.0 } else { -20.0 })
    }

    #[test]
    fn perfect_prediction_is_near_zero() {
        let labels = [0, 1, 2, 3, 1, 1, 0, 3];
        let l = saturated(&labels, 4, 8);
        assert!(dice_loss(&l, &labels).unwrap().item() < 1e-3);
        assert!(combined_loss(&l, &labels).unwrap().item() < 1e-3);
    }

    #[test]
    fn out_of_range_label() {
        let l = Tensor::zeros(&[1, 2, 1, 2]);
        assert!(matches!(dice_loss(&l, &[0, 2]), Err(Error::Data(_))));
    }
}
