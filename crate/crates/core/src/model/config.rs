use serde::{Deserialize, Serialize};

use crate::attention::AttentionConfig;
use crate::error::{Error, Result};

/// Network hyper-parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UTNetConfig {
    pub in_channels: usize,
    pub num_classes: usize,
    /// Width at full resolution; depth `l` has `base_channels * 2^l`.
    pub base_channels: usize,
    /// Number of resolutions (full resolution plus `levels - 1` downsamplings).
    pub levels: usize,
    /// Downsampling depths carrying transformer blocks, as digits (`"1234"`,
    /// `"34"`, `""`). Depth 0 (full resolution) is never allowed.
    pub attention_levels: String,
    pub attention: AttentionConfig,
    /// Plain residual U-Net: every transformer block is stripped.
    pub baseline_mode: bool,
    /// Hidden width of the transformer FFN relative to the block width.
    pub ffn_expansion: usize,
}

impl Default for UTNetConfig {
    fn default() -> Self {
        UTNetConfig {
            in_channels: 1,
            num_classes: 4,
            base_channels: 32,
            levels: 5,
            attention_levels: "1234".into(),
            attention: AttentionConfig::default(),
            baseline_mode: false,
            ffn_expansion: 1,
        }
    }
}

impl UTNetConfig {
    pub fn baseline() -> Self {
        UTNetConfig { baseline_mode: true, ..Default::default() }
    }

    pub fn widths(&self) -> Vec<usize> {
        (0..self.levels).map(|l| self.base_channels << l).collect()
    }

    /// Parsed attention depths (empty in baseline mode), ascending.
    pub fn active_levels(&self) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for ch in self.attention_levels.chars() {
            let d = ch.to_digit(10).ok_or_else(|| {
                Error::Config(format!("attention_levels {:?}: {ch:?} is not a digit", self.attention_levels))
            })? as usize;
            if d == 0 || d >= self.levels {
                return Err(Error::Config(format!(
                    "attention_levels {:?}: depth {d} outside 1..={}",
                    self.attention_levels,
                    self.levels - 1
                )));
            }
            if out.contains(&d) {
                return Err(Error::Config(format!("attention_levels {:?}: depth {d} repeated", self.attention_levels)));
            }
            out.push(d);
        }
        out.sort_unstable();
        Ok(if self.baseline_mode { Vec::new() } else { out })
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.num_classes < 2 || self.base_channels == 0 {
            return Err(Error::Config("in_channels, base_channels must be positive and num_classes >= 2".into()));
        }
        if !(2..=6).contains(&self.levels) {
            return Err(Error::Config(format!("levels must be in 2..=6, got {}", self.levels)));
        }
        if self.ffn_expansion == 0 {
            return Err(Error::Config("ffn_expansion must be positive".into()));
        }
        self.attention.validate()?;
        // encoder attention at depth d runs at width d, decoder attention at width d - 1
        let widths = self.widths();
        for d in self.active_levels()? {
            self.attention.head_dim(widths[d])?;
            self.attention.head_dim(widths[d - 1])?;
        }
        Ok(())
    }

    /// Spatial sizes must be divisible by this.
    pub fn size_multiple(&self) -> usize {
        1 << (self.levels - 1)
    }
}
