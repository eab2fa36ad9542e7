use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial down-projection applied to keys and values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    Bilinear,
    Maxpool,
}

impl std::fmt::Display for Projection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Projection::Bilinear => "bilinear",
            Projection::Maxpool => "maxpool",
        })
    }
}

impl std::str::FromStr for Projection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bilinear" => Ok(Projection::Bilinear),
            "maxpool" => Ok(Projection::Maxpool),
            other => Err(Error::Config(format!("unknown projection {other:?}; valid: bilinear, maxpool"))),
        }
    }
}

/// Attention hyper-parameters. The model width (and hence the head
/// dimension `d = channels / heads`) comes from the weights at each level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttentionConfig {
    pub heads: usize,
    /// Per-axis size of the projected key/value grid; `k = reduced_size^2`.
    pub reduced_size: usize,
    pub projection: Projection,
    pub use_relpos: bool,
    /// Similarity matrices larger than this (summed over heads and batch)
    /// are refused before allocation.
    pub buffer_cap_bytes: u64,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        AttentionConfig {
            heads: 4,
            reduced_size: 8,
            projection: Projection::Bilinear,
            use_relpos: true,
            buffer_cap_bytes: 1 << 30,
        }
    }
}

impl AttentionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 {
            return Err(Error::Config("attention heads must be positive".into()));
        }
        if self.reduced_size == 0 {
            return Err(Error::Config("reduced_size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self, channels: usize) -> Result<usize> {
        self.validate()?;
        if channels == 0 || !channels.is_multiple_of(self.heads) {
            return Err(Error::Config(format!("{channels} channels are not divisible into {} heads", self.heads)));
        }
        Ok(channels / self.heads)
    }

    /// Key/value grid for an `h x w` map, clamped so it never exceeds the map.
    pub fn reduced_grid(&self, h: usize, w: usize) -> (usize, usize) {
        (self.reduced_size.min(h), self.reduced_size.min(w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = AttentionConfig::default();
        assert_eq!(c.heads, 4);
        assert_eq!(c.reduced_size, 8);
        assert_eq!(c.head_dim(64).unwrap(), 16);
        assert!(matches!(c.head_dim(66), Err(Error::Config(_))));
    }

    #[test]
    fn grid_is_clamped() {
        let c = AttentionConfig::default();
        assert_eq!(c.reduced_grid(32, 32), (8, 8));
        assert_eq!(c.reduced_grid(4, 16), (4, 8));
    }

    #[test]
    fn unknown_keys_rejected() {
        let r: std::result::Result<AttentionConfig, _> = serde_json::from_str(r#"{"heads": 2, "bogus": 1}"#);
        assert!(r.is_err());
        let c: AttentionConfig = serde_json::from_str(r#"{"projection": "maxpool"}"#).unwrap();
        assert_eq!(c.projection, Projection::Maxpool);
        assert_eq!(c.heads, 4);
    }
}
