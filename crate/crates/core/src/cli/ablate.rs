use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attention::Projection;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::train::{fit, EpochRow};

use super::config::RunConfig;

/// Hyper-parameter varied by an ablation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    /// Which encoder depths carry transformer blocks.
    Levels,
    /// Per-axis size of the projected key/value grid.
    ReducedSize,
    /// Key/value down-projection.
    Projection,
    /// Relative position logits on or off.
    Relpos,
}

impl AblationAxis {
    pub fn name(self) -> &'static str {
        match self {
            AblationAxis::Levels => "levels",
            AblationAxis::ReducedSize => "reduced_size",
            AblationAxis::Projection => "projection",
            AblationAxis::Relpos => "relpos",
        }
    }

    pub fn valid_values(self) -> &'static [&'static str] {
        match self {
            AblationAxis::Levels => &["4", "34", "234", "1234"],
            AblationAxis::ReducedSize => &["4", "8", "16"],
            AblationAxis::Projection => &["bilinear", "maxpool"],
            AblationAxis::Relpos => &["on", "off"],
        }
    }

    /// Every valid value, in the order above.
    pub fn default_values(self) -> Vec<String> {
        self.valid_values().iter().map(|s| s.to_string()).collect()
    }

    /// `base` with this axis set to `value`; nothing else changes.
    pub fn apply(self, base: &RunConfig, value: &str) -> Result<RunConfig> {
        if !self.valid_values().contains(&value) {
            return Err(Error::Config(format!(
                "invalid {} value {value:?}; valid: {}",
                self.name(),
                self.valid_values().join(", ")
            )));
        }
        let mut cfg = base.clone();
        let a = &mut cfg.model.attention;
        match self {
            AblationAxis::Levels => {
                cfg.model.attention_levels = value.to_string();
                cfg.model.baseline_mode = false;
            }
            AblationAxis::ReducedSize => a.reduced_size = value.parse().expect("validated"),
            AblationAxis::Projection => a.projection = value.parse::<Projection>()?,
            AblationAxis::Relpos => a.use_relpos = value == "on",
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub axis: AblationAxis,
    pub value: String,
    pub params: usize,
    pub best_epoch: Option<usize>,
    pub best_val_dice: f64,
    pub final_val_dice: f64,
}

pub const ABLATION_COLUMNS: &str = "axis,value,params,best_epoch,best_val_dice,final_val_dice";

/// Trains one run per value under `out/<axis>-<value>/`, all from the same
/// seeds and data, and writes `out/ablation.csv`.
pub fn ablate(
    base: &RunConfig,
    axis: AblationAxis,
    values: &[String],
    out: &Path,
    on_epoch: &mut dyn FnMut(&str, &EpochRow),
) -> Result<Vec<AblationRow>> {
    if values.is_empty() {
        return Err(Error::Config("ablation needs at least one value".into()));
    }
    let configs: Vec<RunConfig> = values.iter().map(|v| axis.apply(base, v)).collect::<Result<_>>()?;
    let manifest = base.data.manifest()?;
    fs::create_dir_all(out)?;
    let mut rows = Vec::new();
    for (value, cfg) in values.iter().zip(&configs) {
        let dir = out.join(format!("{}-{value}", axis.name()));
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("config.json"), cfg.to_json())?;
        let mut model = Model::build(&cfg.model, cfg.train.seed)?;
        let report = fit(&mut model, &manifest, &cfg.train, Some(&dir), &mut |r| on_epoch(value, r))?;
        let mean = |r: &EpochRow| r.val_mean().unwrap_or(f64::NAN);
        rows.push(AblationRow {
            axis,
            value: value.clone(),
            params: model.num_params(),
            best_epoch: report.best_epoch,
            best_val_dice: report.best_epoch.map_or(f64::NAN, |e| mean(&report.rows[e])),
            final_val_dice: report.rows.last().map_or(f64::NAN, mean),
        });
        fs::write(out.join("ablation.csv"), ablation_csv(&rows))?;
    }
    Ok(rows)
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = format!("{ABLATION_COLUMNS}\n");
    for r in rows {
        let best = r.best_epoch.map_or(String::new(), |e| e.to_string());
        let _ =
            writeln!(s, "{},{},{},{best},{},{}", r.axis.name(), r.value, r.params, r.best_val_dice, r.final_val_dice);
    }
    s
}
