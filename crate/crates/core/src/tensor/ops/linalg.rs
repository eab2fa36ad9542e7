use crate::error::{Error, Result};
use crate::tensor::gemm::{gemm, Layout};
use crate::tensor::Tensor;

/// `[m x p] . [p x q] -> [m x q]`, or the batched form
/// `[b x m x p] . [b x p x q] -> [b x m x q]`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let mismatch = || Error::dim("matmul", format!("cannot multiply {:?} by {:?}", a.shape(), b.shape()));
    let (batch, m, p, q) = match (a.shape(), b.shape()) {
        (&[m, p], &[p2, q]) if p == p2 => (1, m, p, q),
        (&[ba, m, p], &[bb, p2, q]) if ba == bb && p == p2 => (ba, m, p, q),
        _ => return Err(mismatch()),
    };
    let mut out = vec![0.0; batch * m * q];
    for i in 0..batch {
        gemm(
            m,
            p,
            q,
            1.0,
            &a.data()[i * m * p..],
            Layout::rm(p),
            &b.data()[i * p * q..],
            Layout::rm(q),
            0.0,
            &mut out[i * m * q..],
            Layout::rm(q),
        );
    }
    let shape = if a.ndim() == 2 { vec![m, q] } else { vec![batch, m, q] };
    Tensor::from_op("matmul", out, shape, &[a, b], move |ctx| {
        let (a, b) = (&ctx.inputs[0], &ctx.inputs[1]);
        let ga = a.requires_grad().then(|| {
            // dA = dC . B^T
            let mut g = vec![0.0; batch * m * p];
            for i in 0..batch {
                gemm(
                    m,
                    q,
                    p,
                    1.0,
                    &ctx.grad[i * m * q..],
                    Layout::rm(q),
                    &b.data()[i * p * q..],
                    Layout::rm_t(q),
                    0.0,
                    &mut g[i * m * p..],
                    Layout::rm(p),
                );
            }
            g
        });
        let gb = b.requires_grad().then(|| {
            // dB = A^T . dC
            let mut g = vec![0.0; batch * p * q];
            for i in 0..batch {
                gemm(
                    p,
                    m,
                    q,
                    1.0,
                    &a.data()[i * m * p..],
                    Layout::rm_t(p),
                    &ctx.grad[i * m * q..],
                    Layout::rm(q),
                    0.0,
                    &mut g[i * p * q..],
                    Layout::rm(q),
                );
            }
            g
        });
        vec![ga, gb]
    })
}
