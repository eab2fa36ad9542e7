use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn split_at_axis(op: &'static str, shape: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= shape.len() {
        return Err(Error::index(op, format!("axis {axis} out of range for shape {shape:?}")));
    }
    Ok((shape[..axis].iter().product(), shape[axis], shape[axis + 1..].iter().product()))
}

/// Softmax along `axis`, max-subtracted.
pub fn softmax(x: &Tensor, axis: usize) -> Result<Tensor> {
    let (outer, len, inner) = split_at_axis("softmax", x.shape(), axis)?;
    let xd = x.data();
    let mut out = vec![0.0; x.numel()];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * len * inner + i;
            let mut m = f64::NEG_INFINITY;
            for k in 0..len {
                m = m.max(xd[base + k * inner]);
            }
            let mut s = 0.0;
            for k in 0..len {
                let e = (xd[base + k * inner] - m).exp();
                out[base + k * inner] = e;
                s += e;
            }
            for k in 0..len {
                out[base + k * inner] /= s;
            }
        }
    }
    Tensor::from_op("softmax", out, x.shape().to_vec(), &[x], move |ctx| {
        let y = ctx.output;
        let g = ctx.grad;
        let mut dx = vec![0.0; y.len()];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let dot: f64 = (0..len).map(|k| g[base + k * inner] * y[base + k * inner]).sum();
                for k in 0..len {
                    let j = base + k * inner;
                    dx[j] = y[j] * (g[j] - dot);
                }
            }
        }
        vec![Some(dx)]
    })
}

/// Mean cross-entropy of `logits: [N, K, ...]` against integer class labels
/// laid out as `[N, ...]` (class axis removed).
pub fn cross_entropy_with_logits(logits: &Tensor, labels: &[u8]) -> Result<Tensor> {
    if logits.ndim() < 2 {
        return Err(Error::dim("cross_entropy", format!("logits {:?} lack a class axis", logits.shape())));
    }
    let (outer, k, inner) = split_at_axis("cross_entropy", logits.shape(), 1)?;
    if labels.len() != outer * inner {
        return Err(Error::dim("cross_entropy", format!("{} labels for logits {:?}", labels.len(), logits.shape())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= k) {
        return Err(Error::Data(format!("label {bad} out of range for {k} classes")));
    }
    let xd = logits.data();
    let count = (outer * inner) as f64;
    let mut probs = vec![0.0; logits.numel()];
    let mut total = 0.0;
    for o in 0..outer {
        for i in 0..inner {
            let base = o * k * inner + i;
            let m = (0..k).map(|c| xd[base + c * inner]).fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = (0..k).map(|c| (xd[base + c * inner] - m).exp()).sum();
            let lse = m + s.ln();
            for c in 0..k {
                probs[base + c * inner] = (xd[base + c * inner] - lse).exp();
            }
            let label = labels[o * inner + i] as usize;
            total += lse - xd[base + label * inner];
        }
    }
    let labels = labels.to_vec();
    Tensor::from_op("cross_entropy", vec![total / count], vec![1], &[logits], move |ctx| {
        let scale = ctx.grad[0] / count;
        let mut dx: Vec<f64> = probs.iter().map(|p| p * scale).collect();
        for o in 0..outer {
            for i in 0..inner {
                let label = labels[o * inner + i] as usize;
                dx[o * k * inner + label * inner + i] -= scale;
            }
        }
        vec![Some(dx)]
    })
}
