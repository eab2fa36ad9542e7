use super::nchw;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Max pooling to an arbitrary target size. Output cell `i` covers input
/// rows `[floor(i H / oh), ceil((i + 1) H / oh))`, and likewise for columns.
pub fn adaptive_max_pool_2d(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (b, c, h, w) = nchw("adaptive_max_pool_2d", x)?;
    if out_h == 0 || out_w == 0 || out_h > h || out_w > w {
        return Err(Error::dim("adaptive_max_pool_2d", format!("cannot pool {h}x{w} to {out_h}x{out_w}")));
    }
    let win = |i: usize, n: usize, o: usize| (i * n / o, ((i + 1) * n).div_ceil(o));
    let planes = b * c;
    let mut out = Vec::with_capacity(planes * out_h * out_w);
    let mut argmax = Vec::with_capacity(planes * out_h * out_w);
    for p in 0..planes {
        let src = &x.data()[p * h * w..(p + 1) * h * w];
        for oy in 0..out_h {
            let (y0, y1) = win(oy, h, out_h);
            for ox in 0..out_w {
                let (x0, x1) = win(ox, w, out_w);
                let mut best = (y0 * w + x0, src[y0 * w + x0]);
                for yy in y0..y1 {
                    for xx in x0..x1 {
                        let v = src[yy * w + xx];
                        if v > best.1 {
                            best = (yy * w + xx, v);
                        }
                    }
                }
                out.push(best.1);
                argmax.push(p * h * w + best.0);
            }
        }
    }
    let n_in = x.numel();
    Tensor::from_op("max_pool_2d", out, vec![b, c, out_h, out_w], &[x], move |ctx| {
        let mut g = vec![0.0; n_in];
        for (o, &src) in argmax.iter().enumerate() {
            g[src] += ctx.grad[o];
        }
        vec![Some(g)]
    })
}

/// 2x2 max pooling with stride 2.
pub fn max_pool_2d(x: &Tensor) -> Result<Tensor> {
    let (_, _, h, w) = nchw("max_pool_2d", x)?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::dim("max_pool_2d", format!("{h}x{w} is not divisible by 2")));
    }
    adaptive_max_pool_2d(x, h / 2, w / 2)
}
