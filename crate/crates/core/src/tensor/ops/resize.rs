use super::nchw;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-output-index source taps along one axis: `(i0, i1, w0, w1)`.
///
/// Half-pixel centres: `src = (dst + 0.5) * in / out - 0.5`, clamped below at
/// zero; `i1 = min(i0 + 1, in - 1)`.
pub(crate) fn taps(input: usize, output: usize) -> Vec<(usize, usize, f64, f64)> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|d| {
            let src = ((d as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(input - 1);
            let i1 = (i0 + 1).min(input - 1);
            let l = src - i0 as f64;
            (i0, i1, 1.0 - l, l)
        })
        .collect()
}

/// Bilinear resampling of `[B,C,H,W]` to `[B,C,out_h,out_w]`.
pub fn bilinear_resize(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (b, c, h, w) = nchw("bilinear_resize", x)?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::dim("bilinear_resize", format!("target {out_h}x{out_w} is empty")));
    }
    if out_h == h && out_w == w {
        // the tap formula reduces to the identity here
        return Tensor::from_op("bilinear_resize", x.to_vec(), x.shape().to_vec(), &[x], |ctx| {
            vec![Some(ctx.grad.to_vec())]
        });
    }
    let ty = taps(h, out_h);
    let tx = taps(w, out_w);
    let planes = b * c;
    let mut out = vec![0.0; planes * out_h * out_w];
    for p in 0..planes {
        let src = &x.data()[p * h * w..(p + 1) * h * w];
        let dst = &mut out[p * out_h * out_w..(p + 1) * out_h * out_w];
        for (oy, &(y0, y1, wy0, wy1)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, wx0, wx1)) in tx.iter().enumerate() {
                dst[oy * out_w + ox] = wy0 * (wx0 * src[y0 * w + x0] + wx1 * src[y0 * w + x1])
                    + wy1 * (wx0 * src[y1 * w + x0] + wx1 * src[y1 * w + x1]);
            }
        }
    }
    Tensor::from_op("bilinear_resize", out, vec![b, c, out_h, out_w], &[x], move |ctx| {
        let mut g = vec![0.0; planes * h * w];
        for p in 0..planes {
            let go = &ctx.grad[p * out_h * out_w..(p + 1) * out_h * out_w];
            let gi = &mut g[p * h * w..(p + 1) * h * w];
            for (oy, &(y0, y1, wy0, wy1)) in ty.iter().enumerate() {
                for (ox, &(x0, x1, wx0, wx1)) in tx.iter().enumerate() {
                    let v = go[oy * out_w + ox];
                    gi[y0 * w + x0] += v * wy0 * wx0;
                    gi[y0 * w + x1] += v * wy0 * wx1;
                    gi[y1 * w + x0] += v * wy1 * wx0;
                    gi[y1 * w + x1] += v * wy1 * wx1;
                }
            }
        }
        vec![Some(g)]
    })
}
