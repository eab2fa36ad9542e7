use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn sum_all(a: &Tensor) -> Result<Tensor> {
    let s = a.data().iter().sum();
    Tensor::from_op("sum_all", vec![s], vec![1], &[a], |ctx| vec![Some(vec![ctx.grad[0]; ctx.inputs[0].numel()])])
}

pub fn mean_all(a: &Tensor) -> Result<Tensor> {
    let n = a.numel() as f64;
    let s = a.data().iter().sum::<f64>() / n;
    Tensor::from_op("mean_all", vec![s], vec![1], &[a], move |ctx| {
        vec![Some(vec![ctx.grad[0] / n; ctx.inputs[0].numel()])]
    })
}

/// Sums over the listed axes, dropping them from the shape. Reducing every
/// axis yields shape `[1]`.
pub fn sum_axes(a: &Tensor, axes: &[usize]) -> Result<Tensor> {
    let shape = a.shape().to_vec();
    for &ax in axes {
        if ax >= shape.len() {
            return Err(Error::index("sum_axes", format!("axis {ax} out of range for shape {shape:?}")));
        }
    }
    let keep: Vec<bool> = (0..shape.len()).map(|i| !axes.contains(&i)).collect();
    let mut out_shape: Vec<usize> = shape.iter().zip(&keep).filter(|(_, &k)| k).map(|(&d, _)| d).collect();
    if out_shape.is_empty() {
        out_shape.push(1);
    }
    let index_map = output_index_map(&shape, &keep);
    let mut out = vec![0.0; out_shape.iter().product()];
    for (i, &v) in a.data().iter().enumerate() {
        out[index_map[i]] += v;
    }
    Tensor::from_op("sum_axes", out, out_shape, &[a], move |ctx| {
        vec![Some(index_map.iter().map(|&o| ctx.grad[o]).collect())]
    })
}

/// Flat output index for every flat input index.
fn output_index_map(shape: &[usize], keep: &[bool]) -> Vec<usize> {
    let n: usize = shape.iter().product();
    let mut out_strides = vec![0usize; shape.len()];
    let mut acc = 1;
    for i in (0..shape.len()).rev() {
        if keep[i] {
            out_strides[i] = acc;
            acc *= shape[i];
        }
    }
    let mut map = Vec::with_capacity(n);
    let mut idx = vec![0usize; shape.len()];
    for _ in 0..n {
        map.push(idx.iter().zip(&out_strides).map(|(i, s)| i * s).sum());
        for ax in (0..shape.len()).rev() {
            idx[ax] += 1;
            if idx[ax] < shape[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_over_middle_axis() {
        let x = Tensor::from_fn(&[2, 3, 2], |i| i as f64);
        let y = sum_axes(&x, &[1]).unwrap();
        assert_eq!(y.shape(), &[2, 2]);
        assert_eq!(y.data(), &[6.0, 9.0, 24.0, 27.0]);
    }

    #[test]
    fn bad_axis() {
        let x = Tensor::zeros(&[2, 2]);
        assert!(matches!(sum_axes(&x, &[2]), Err(Error::Index { .. })));
    }
}
