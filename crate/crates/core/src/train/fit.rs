use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{check_compatible, score_samples};
use crate::model::{save_checkpoint, Model};
use crate::rng::SplitMix64;
use crate::synthdata::{augment, stack_inputs, DatasetManifest, SegmentationSample, Split, NUM_CLASSES};

use super::config::{lr_at, TrainConfig};
use super::loss::combined_loss;
use super::optim::{sgd_step, OptimizerState};

/// One row of `report.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub lr: f64,
    /// Sample-weighted mean of the batch losses.
    pub train_loss: f64,
    /// Validation Dice per foreground class; empty without a val split.
    pub val_dice: Vec<f64>,
}

impl EpochRow {
    pub fn val_mean(&self) -> Option<f64> {
        (!self.val_dice.is_empty()).then(|| self.val_dice.iter().sum::<f64>() / self.val_dice.len() as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub rows: Vec<EpochRow>,
    /// Epoch with the highest mean validation Dice (first on ties).
    pub best_epoch: Option<usize>,
}

pub const REPORT_COLUMNS: &str = "epoch,lr,train_loss,val_dice_lv,val_dice_myo,val_dice_rv,val_dice_mean";

impl TrainReport {
    /// `#`-prefixed header lines describing the run, then the CSV table.
    pub fn to_csv(&self, model: &Model, cfg: &TrainConfig) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# epochs={} base_lr={} momentum={} weight_decay={} batch_size={} lr_gamma={} seed={} augment={}",
            cfg.epochs,
            cfg.base_lr,
            cfg.momentum,
            cfg.weight_decay,
            cfg.batch_size,
            cfg.lr_gamma,
            cfg.seed,
            cfg.augment
        );
        let _ = writeln!(
            s,
            "# model_seed={} params={} levels={} attention_levels={} baseline={}",
            model.seed,
            model.num_params(),
            model.config.levels,
            model.config.attention_levels,
            model.config.baseline_mode
        );
        s.push_str(REPORT_COLUMNS);
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{},{},{}", r.epoch, r.lr, r.train_loss);
            if r.val_dice.is_empty() {
                s.push_str(",,,,\n");
            } else {
                for d in &r.val_dice {
                    let _ = write!(s, ",{d}");
                }
                let _ = writeln!(s, ",{}", r.val_mean().unwrap_or(f64::NAN));
            }
        }
        s
    }
}

fn with_step_context(e: Error, epoch: usize, step: usize) -> Error {
    match e {
        Error::NonFinite { op } => Error::NonFinite { op: format!("{op} (epoch {epoch}, step {step})") },
        other => other,
    }
}

/// Mean validation Dice per foreground class.
fn validate_dice(model: &Model, val: &[SegmentationSample], batch: usize) -> Result<Vec<f64>> {
    if val.is_empty() {
        return Ok(Vec::new());
    }
    let scores = score_samples(model, val, batch)?;
    Ok((0..NUM_CLASSES - 1).map(|c| scores.iter().map(|s| s.dice[c]).sum::<f64>() / scores.len() as f64).collect())
}

/// Trains on the manifest's train split with SGD and the Dice + CE loss.
/// With `out`, writes `report.csv`, periodic checkpoints under `ckpt/`, the
/// best-validation checkpoint under `best/` and the last one under `final/`.
/// `on_epoch` sees each row as it completes.
pub fn fit(
    model: &mut Model,
    manifest: &DatasetManifest,
    cfg: &TrainConfig,
    out: Option<&Path>,
    on_epoch: &mut dyn FnMut(&EpochRow),
) -> Result<TrainReport> {
    cfg.validate()?;
    check_compatible(model, manifest.size)?;
    let train = manifest.load(Split::Train)?;
    if train.is_empty() {
        return Err(Error::Data("manifest has no training samples".into()));
    }
    let val = manifest.load(Split::Val)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
    }

    let mut opt = OptimizerState::new(cfg.momentum, cfg.weight_decay);
    let mut report = TrainReport { rows: Vec::with_capacity(cfg.epochs), best_epoch: None };
    let mut best = f64::NEG_INFINITY;
    for epoch in 0..cfg.epochs {
        let lr = lr_at(epoch, cfg);
        let mut order: Vec<usize> = (0..train.len()).collect();
        SplitMix64::derive(cfg.seed, &[epoch as u64, 10]).shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (step, idx) in order.chunks(cfg.batch_size).enumerate() {
            let drawn: Vec<SegmentationSample> = if cfg.augment {
                idx.iter()
                    .map(|&i| {
                        augment(&train[i], SplitMix64::derive(cfg.seed, &[epoch as u64, i as u64, 11]).next_u64())
                    })
                    .collect::<Result<_>>()?
            } else {
                idx.iter().map(|&i| train[i].clone()).collect()
            };
            let refs: Vec<&SegmentationSample> = drawn.iter().collect();
            let (x, labels) = stack_inputs(&refs)?;
            let loss = model
                .forward(&x, true)
                .and_then(|logits| combined_loss(&logits, &labels))
                .map_err(|e| with_step_context(e, epoch, step))?;
            let value = loss.item();
            if !value.is_finite() {
                return Err(Error::NonFinite { op: format!("combined_loss = {value} (epoch {epoch}, step {step})") });
            }
            loss.backward().map_err(|e| with_step_context(e, epoch, step))?;
            sgd_step(&mut model.params, &mut opt, lr)?;
            loss_sum += value * idx.len() as f64;
        }
        let row = EpochRow {
            epoch,
            lr,
            train_loss: loss_sum / train.len() as f64,
            val_dice: validate_dice(model, &val, cfg.batch_size)?,
        };
        on_epoch(&row);
        if let Some(dir) = out {
            if cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 {
                save_checkpoint(model, &dir.join("ckpt").join(format!("epoch_{:04}", epoch + 1)), epoch + 1, lr)?;
            }
            if let Some(m) = row.val_mean() {
                if m > best {
                    save_checkpoint(model, &dir.join("best"), epoch + 1, lr)?;
                }
            }
        }
        if let Some(m) = row.val_mean() {
            if m > best {
                best = m;
                report.best_epoch = Some(epoch);
            }
        }
        report.rows.push(row);
        if let Some(dir) = out {
            fs::write(dir.join("report.csv"), report.to_csv(model, cfg))?;
        }
    }
    if let Some(dir) = out {
        let last = report.rows.last().map_or(0.0, |r| r.lr);
        save_checkpoint(model, &dir.join("final"), cfg.epochs, last)?;
    }
    Ok(report)
}
