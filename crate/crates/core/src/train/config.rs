use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimisation recipe. Defaults follow the published recipe except the
/// batch size, which is halved for CPU budgets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub base_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Per-epoch multiplicative learning-rate decay.
    pub lr_gamma: f64,
    pub seed: u64,
    /// Random rotation/scale/translation/noise/gamma on every training draw.
    pub augment: bool,
    /// Write `ckpt/epoch_NNNN` every this many epochs; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 150,
            base_lr: 0.05,
            momentum: 0.9,
            weight_decay: 1e-4,
            batch_size: 8,
            lr_gamma: 0.98,
            seed: 0,
            augment: true,
            checkpoint_every: 10,
        }
    }
}

impl TrainConfig {
    /// Momentum and weight decay may be zero (plain SGD, no decay); every
    /// other number must be positive and `lr_gamma` must lie in (0, 1].
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("train: {what}")));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return bad("base_lr must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must be in [0, 1)");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        if !(self.lr_gamma > 0.0 && self.lr_gamma <= 1.0) {
            return bad("lr_gamma must be in (0, 1]");
        }
        Ok(())
    }
}

/// `base_lr * lr_gamma^epoch`, epochs counted from 0.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    cfg.base_lr * cfg.lr_gamma.powi(epoch as i32)
}
