//! Tensor files: a raw little-endian f64 payload (`<name>.bin`) with a JSON
//! sidecar (`<name>.json`) of the form `{"name": .., "dtype": "f64", "shape": [..]}`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorManifest {
    pub name: String,
    pub dtype: String,
    pub shape: Vec<usize>,
}

pub fn save_raw(dir: &Path, name: &str, shape: &[usize], data: &[f64]) -> Result<()> {
    let manifest = TensorManifest { name: name.to_string(), dtype: "f64".into(), shape: shape.to_vec() };
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(dir.join(format!("{name}.bin")), bytes)?;
    fs::write(dir.join(format!("{name}.json")), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

pub fn save_tensor(dir: &Path, name: &str, t: &Tensor) -> Result<()> {
    save_raw(dir, name, t.shape(), t.data())
}

/// Reads `(shape, data)` for `name`, validating the manifest.
pub fn load_raw(dir: &Path, name: &str) -> Result<(Vec<usize>, Vec<f64>)> {
    let manifest: TensorManifest = serde_json::from_str(&fs::read_to_string(dir.join(format!("{name}.json")))?)?;
    if manifest.dtype != "f64" {
        return Err(Error::Data(format!("{name}: unsupported dtype {}", manifest.dtype)));
    }
    if manifest.name != name {
        return Err(Error::Data(format!("manifest names {} but file is {name}", manifest.name)));
    }
    let bytes = fs::read(dir.join(format!("{name}.bin")))?;
    let n: usize = manifest.shape.iter().product();
    if bytes.len() != n * 8 {
        return Err(Error::Data(format!(
            "{name}: payload has {} bytes, shape {:?} needs {}",
            bytes.len(),
            manifest.shape,
            n * 8
        )));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Ok((manifest.shape, data))
}

pub fn load_tensor(dir: &Path, name: &str) -> Result<Tensor> {
    let (shape, data) = load_raw(dir, name)?;
    Tensor::new(data, &shape)
}
