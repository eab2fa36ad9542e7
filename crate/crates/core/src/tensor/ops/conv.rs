use super::nchw;
use crate::error::{Error, Result};
use crate::tensor::gemm::{gemm, Layout};
use crate::tensor::Tensor;

#[derive(Clone, Copy)]
struct Geom {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl Geom {
    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }

    fn rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }
}

fn im2col(x: &[f64], g: &Geom, cols: &mut [f64]) {
    let n = g.cols();
    for c in 0..g.c {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let dst = &mut cols[row * n..(row + 1) * n];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    let line = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    if iy < 0 || iy >= g.h as isize {
                        line.fill(0.0);
                        continue;
                    }
                    let src = &x[(c * g.h + iy as usize) * g.w..][..g.w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        *v = if ix < 0 || ix >= g.w as isize { 0.0 } else { src[ix as usize] };
                    }
                }
            }
        }
    }
}

fn col2im(cols: &[f64], g: &Geom, dx: &mut [f64]) {
    let n = g.cols();
    for c in 0..g.c {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let src = &cols[row * n..(row + 1) * n];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut dx[(c * g.h + iy as usize) * g.w..][..g.w];
                    for ox in 0..g.ow {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += src[oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// 2-D cross-correlation. `x: [B,C,H,W]`, `w: [O,C,kh,kw]`, optional
/// `bias: [O]`. Output extent is `floor((H + 2 pad - kh) / stride) + 1`.
pub fn conv2d(x: &Tensor, w: &Tensor, bias: Option<&Tensor>, stride: usize, pad: usize) -> Result<Tensor> {
    let (b, c, h, wd) = nchw("conv2d", x)?;
    let (o, wc, kh, kw) = nchw("conv2d", w)?;
    if wc != c {
        return Err(Error::dim(
            "conv2d",
            format!("input {:?} has {c} channels, kernel {:?} expects {wc}", x.shape(), w.shape()),
        ));
    }
    if stride == 0 {
        return Err(Error::dim("conv2d", "stride must be positive"));
    }
    if h + 2 * pad < kh || wd + 2 * pad < kw {
        return Err(Error::dim("conv2d", format!("kernel {kh}x{kw} larger than padded input {h}x{wd} (pad {pad})")));
    }
    if let Some(bias) = bias {
        if bias.shape() != [o] {
            return Err(Error::dim("conv2d", format!("bias {:?} does not match {o} output channels", bias.shape())));
        }
    }
    let g = Geom {
        c,
        h,
        w: wd,
        kh,
        kw,
        stride,
        pad,
        oh: (h + 2 * pad - kh) / stride + 1,
        ow: (wd + 2 * pad - kw) / stride + 1,
    };
    let (rows, ncols) = (g.rows(), g.cols());
    let mut out = vec![0.0; b * o * ncols];
    let mut cols = if g.is_pointwise() { Vec::new() } else { vec![0.0; rows * ncols] };
    for bi in 0..b {
        let xb = &x.data()[bi * c * h * wd..(bi + 1) * c * h * wd];
        let cm: &[f64] = if g.is_pointwise() {
            xb
        } else {
            im2col(xb, &g, &mut cols);
            &cols
        };
        let ob = &mut out[bi * o * ncols..(bi + 1) * o * ncols];
        if let Some(bias) = bias {
            for (oc, chunk) in ob.chunks_mut(ncols).enumerate() {
                chunk.fill(bias.data()[oc]);
            }
        }
        gemm(o, rows, ncols, 1.0, w.data(), Layout::rm(rows), cm, Layout::rm(ncols), 1.0, ob, Layout::rm(ncols));
    }

    let mut inputs = vec![x, w];
    if let Some(bias) = bias {
        inputs.push(bias);
    }
    Tensor::from_op("conv2d", out, vec![b, o, g.oh, g.ow], &inputs, move |ctx| {
        let (x, w) = (&ctx.inputs[0], &ctx.inputs[1]);
        let mut dx = x.requires_grad().then(|| vec![0.0; x.numel()]);
        let mut dw = w.requires_grad().then(|| vec![0.0; w.numel()]);
        let mut cols = if g.is_pointwise() { Vec::new() } else { vec![0.0; rows * ncols] };
        let mut dcols = if g.is_pointwise() { Vec::new() } else { vec![0.0; rows * ncols] };
        let xstride = g.c * g.h * g.w;
        for bi in 0..b {
            let gout = &ctx.grad[bi * o * ncols..(bi + 1) * o * ncols];
            if let Some(dw) = dw.as_mut() {
                let xb = &x.data()[bi * xstride..(bi + 1) * xstride];
                let cm: &[f64] = if g.is_pointwise() {
                    xb
                } else {
                    im2col(xb, &g, &mut cols);
                    &cols
                };
                // dW += dOut . cols^T
                gemm(o, ncols, rows, 1.0, gout, Layout::rm(ncols), cm, Layout::rm_t(ncols), 1.0, dw, Layout::rm(rows));
            }
            if let Some(dx) = dx.as_mut() {
                let dxb = &mut dx[bi * xstride..(bi + 1) * xstride];
                if g.is_pointwise() {
                    gemm(
                        rows,
                        o,
                        ncols,
                        1.0,
                        w.data(),
                        Layout::rm_t(rows),
                        gout,
                        Layout::rm(ncols),
                        1.0,
                        dxb,
                        Layout::rm(ncols),
                    );
                } else {
                    gemm(
                        rows,
                        o,
                        ncols,
                        1.0,
                        w.data(),
                        Layout::rm_t(rows),
                        gout,
                        Layout::rm(ncols),
                        0.0,
                        &mut dcols,
                        Layout::rm(ncols),
                    );
                    col2im(&dcols, &g, dxb);
                }
            }
        }
        let mut grads = vec![dx, dw];
        if ctx.inputs.len() == 3 {
            let db = ctx.inputs[2].requires_grad().then(|| {
                let mut db = vec![0.0; o];
                for bi in 0..b {
                    for (oc, d) in db.iter_mut().enumerate() {
                        *d += ctx.grad[(bi * o + oc) * ncols..][..ncols].iter().sum::<f64>();
                    }
                }
                db
            });
            grads.push(db);
        }
        grads
    })
}
