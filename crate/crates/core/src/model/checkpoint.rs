use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::io::{load_raw, save_raw};
use crate::tensor::Tensor;

use super::config::UTNetConfig;
use super::net::Model;
use super::params::Census;

/// Contents of `model.json` in a checkpoint directory. Every parameter is
/// stored as `<name>.bin` + `<name>.json`, every batch-norm layer as
/// `<name>.running_mean` and `<name>.running_var` in the same format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub config: UTNetConfig,
    pub seed: u64,
    pub epoch: usize,
    pub lr: f64,
    pub census: Census,
    pub params: Vec<String>,
}

pub fn save_checkpoint(model: &Model, dir: &Path, epoch: usize, lr: f64) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, t, _) in model.params.iter() {
        save_raw(dir, name, t.shape(), t.data())?;
    }
    for (name, stats) in model.buffers.iter() {
        let mean = stats.mean.borrow();
        let var = stats.var.borrow();
        save_raw(dir, &format!("{name}.running_mean"), &[mean.len()], &mean)?;
        save_raw(dir, &format!("{name}.running_var"), &[var.len()], &var)?;
    }
    let meta = CheckpointMeta {
        config: model.config.clone(),
        seed: model.seed,
        epoch,
        lr,
        census: model.census(),
        params: model.params.names(),
    };
    fs::write(dir.join("model.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<(Model, CheckpointMeta)> {
    let meta_path = dir.join("model.json");
    let text = fs::read_to_string(&meta_path)
        .map_err(|e| Error::Config(format!("cannot read checkpoint {}: {e}", meta_path.display())))?;
    let meta: CheckpointMeta = serde_json::from_str(&text)?;
    let mut model = Model::build(&meta.config, meta.seed)?;
    if model.params.names() != meta.params {
        return Err(Error::Config(format!(
            "checkpoint {} lists parameters that do not match its config",
            dir.display()
        )));
    }
    for name in &meta.params {
        let (shape, data) = load_raw(dir, name)?;
        if shape != model.params.get(name)?.shape() {
            return Err(Error::Config(format!("checkpoint parameter {name} has shape {shape:?}")));
        }
        model.params.set(name, Tensor::param(data, &shape)?)?;
    }
    for (name, stats) in model.buffers.iter() {
        for (suffix, slot) in [("running_mean", &stats.mean), ("running_var", &stats.var)] {
            let (shape, data) = load_raw(dir, &format!("{name}.{suffix}"))?;
            if shape != [slot.borrow().len()] {
                return Err(Error::Config(format!("checkpoint buffer {name}.{suffix} has shape {shape:?}")));
            }
            *slot.borrow_mut() = data;
        }
    }
    Ok((model, meta))
}
