use crate::error::{Error, Result};
use crate::tensor::{numel, Tensor};

pub fn reshape(a: &Tensor, shape: &[usize]) -> Result<Tensor> {
    if numel(shape) != a.numel() {
        return Err(Error::dim("reshape", format!("cannot reshape {:?} into {shape:?}", a.shape())));
    }
    Tensor::from_op("reshape", a.to_vec(), shape.to_vec(), &[a], |ctx| vec![Some(ctx.grad.to_vec())])
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Output axis `i` is input axis `axes[i]`.
pub fn permute(a: &Tensor, axes: &[usize]) -> Result<Tensor> {
    let rank = a.ndim();
    let mut seen = vec![false; rank];
    if axes.len() != rank || axes.iter().any(|&ax| ax >= rank || std::mem::replace(&mut seen[ax], true)) {
        return Err(Error::index("permute", format!("{axes:?} is not a permutation of the axes of {:?}", a.shape())));
    }
    let in_shape = a.shape();
    let in_strides = strides(in_shape);
    let out_shape: Vec<usize> = axes.iter().map(|&ax| in_shape[ax]).collect();
    let src_strides: Vec<usize> = axes.iter().map(|&ax| in_strides[ax]).collect();
    // gather[o] = flat input index feeding flat output index o
    let n = a.numel();
    let mut gather = Vec::with_capacity(n);
    let mut idx = vec![0usize; rank];
    for _ in 0..n {
        gather.push(idx.iter().zip(&src_strides).map(|(i, s)| i * s).sum::<usize>());
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            if idx[ax] < out_shape[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
    let x = a.data();
    let data = gather.iter().map(|&g| x[g]).collect();
    Tensor::from_op("permute", data, out_shape, &[a], move |ctx| {
        let mut g = vec![0.0; gather.len()];
        for (o, &src) in gather.iter().enumerate() {
            g[src] = ctx.grad[o];
        }
        vec![Some(g)]
    })
}

/// Swaps two axes.
pub fn transpose(a: &Tensor, ax0: usize, ax1: usize) -> Result<Tensor> {
    let mut axes: Vec<usize> = (0..a.ndim()).collect();
    if ax0 >= axes.len() || ax1 >= axes.len() {
        return Err(Error::index("transpose", format!("axes ({ax0}, {ax1}) out of range for {:?}", a.shape())));
    }
    axes.swap(ax0, ax1);
    permute(a, &axes)
}

/// Concatenates along `axis`; all other extents must agree.
pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
    let first = parts.first().ok_or_else(|| Error::dim("concat", "no inputs"))?;
    let rank = first.ndim();
    if axis >= rank {
        return Err(Error::index("concat", format!("axis {axis} out of range for {:?}", first.shape())));
    }
    for p in parts {
        let ok = p.ndim() == rank && (0..rank).all(|i| i == axis || p.shape()[i] == first.shape()[i]);
        if !ok {
            return Err(Error::dim(
                "concat",
                format!("shapes {:?} and {:?} disagree off axis {axis}", first.shape(), p.shape()),
            ));
        }
    }
    let outer: usize = first.shape()[..axis].iter().product();
    let inner: usize = first.shape()[axis + 1..].iter().product();
    let widths: Vec<usize> = parts.iter().map(|p| p.shape()[axis] * inner).collect();
    let total: usize = widths.iter().sum();
    let mut data = Vec::with_capacity(outer * total);
    for o in 0..outer {
        for (p, &w) in parts.iter().zip(&widths) {
            data.extend_from_slice(&p.data()[o * w..(o + 1) * w]);
        }
    }
    let mut shape = first.shape().to_vec();
    shape[axis] = parts.iter().map(|p| p.shape()[axis]).sum();
    Tensor::from_op("concat", data, shape, parts, move |ctx| {
        let mut grads: Vec<Vec<f64>> = widths.iter().map(|&w| Vec::with_capacity(outer * w)).collect();
        let mut off = 0;
        for _ in 0..outer {
            for (g, &w) in grads.iter_mut().zip(&widths) {
                g.extend_from_slice(&ctx.grad[off..off + w]);
                off += w;
            }
        }
        grads.into_iter().map(Some).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permute_matches_index_formula() {
        let x = Tensor::from_fn(&[2, 3, 4], |i| i as f64);
        let y = permute(&x, &[2, 0, 1]).unwrap();
        assert_eq!(y.shape(), &[4, 2, 3]);
        for c in 0..4 {
            for a in 0..2 {
                for b in 0..3 {
                    assert_eq!(y.data()[c * 6 + a * 3 + b], (a * 12 + b * 4 + c) as f64);
                }
            }
        }
    }

    #[test]
    fn permute_rejects_duplicates() {
        let x = Tensor::zeros(&[2, 2]);
        assert!(permute(&x, &[0, 0]).is_err());
    }

    #[test]
    fn concat_channels() {
        let a = Tensor::from_fn(&[1, 1, 2], |i| i as f64);
        let b = Tensor::from_fn(&[1, 2, 2], |i| 10.0 + i as f64);
        let c = concat(&[&a, &b], 1).unwrap();
        assert_eq!(c.shape(), &[1, 3, 2]);
        assert_eq!(c.data(), &[0.0, 1.0, 10.0, 11.0, 12.0, 13.0]);
    }

    #[test]
    fn reshape_checks_count() {
        let a = Tensor::zeros(&[2, 3]);
        assert!(reshape(&a, &[3, 2]).is_ok());
        assert!(reshape(&a, &[4, 2]).is_err());
    }
}
