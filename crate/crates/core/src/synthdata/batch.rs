use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::phantom::SegmentationSample;

/// Stacks samples into a network input `[B, 1, H, W]` plus flattened labels.
/// Every image is standardized to zero mean and unit variance on its own, so
/// vendor gain and offset differences do not reach the first convolution
/// unchanged. Training, evaluation and the FFI all go through here.
pub fn stack_inputs(samples: &[&SegmentationSample]) -> Result<(Tensor, Vec<u8>)> {
    let Some(first) = samples.first() else {
        return Err(Error::Data("cannot stack an empty batch".into()));
    };
    let size = first.size;
    let mut data = Vec::with_capacity(samples.len() * size * size);
    let mut labels = Vec::with_capacity(samples.len() * size * size);
    for s in samples {
        if s.size != size {
            return Err(Error::Data(format!("batch mixes sizes {size} and {}", s.size)));
        }
        data.extend(standardize(s.image.data()));
        labels.extend_from_slice(&s.label);
    }
    Ok((Tensor::new(data, &[samples.len(), 1, size, size])?, labels))
}

/// Zero-mean, unit-variance copy of `img`; a constant image maps to zeros.
pub fn standardize(img: &[f64]) -> Vec<f64> {
    let n = img.len() as f64;
    let mean = img.iter().sum::<f64>() / n;
    let var = img.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let inv = if var > 1e-12 { 1.0 / var.sqrt() } else { 0.0 };
    img.iter().map(|v| (v - mean) * inv).collect()
}
