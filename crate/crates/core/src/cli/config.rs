use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::UTNetConfig;
use crate::synthdata::{make_splits, DatasetManifest, SplitConfig};
use crate::train::TrainConfig;

/// Schema version of run configuration files.
pub const SPEC_VERSION: &str = "1";

/// Where training data comes from: an existing manifest file, or splits
/// generated on the fly.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Takes precedence over `splits` when set.
    pub manifest: Option<PathBuf>,
    pub splits: SplitConfig,
}

impl DataConfig {
    pub fn manifest(&self) -> Result<DatasetManifest> {
        match &self.manifest {
            Some(p) => DatasetManifest::load_json(p),
            None => make_splits(&self.splits),
        }
    }
}

/// A complete run description. Every section has defaults; unknown keys are
/// rejected. `train.seed` also seeds the network initialisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spec_version: String,
    #[serde(default)]
    pub model: UTNetConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub data: DataConfig,
    /// Output directory; `--out` overrides it.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            spec_version: SPEC_VERSION.into(),
            model: UTNetConfig::default(),
            train: TrainConfig::default(),
            data: DataConfig::default(),
            out: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.spec_version != SPEC_VERSION {
            return Err(Error::Config(format!(
                "config spec_version {:?} is not supported (expected {SPEC_VERSION:?})",
                self.spec_version
            )));
        }
        self.model.validate()?;
        self.train.validate()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}
