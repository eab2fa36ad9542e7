use std::cell::Cell;

use crate::error::{Error, Result};
use crate::tensor::gemm::{gemm, Layout};
use crate::tensor::{grad_enabled, Tensor};

/// Instrumented similarity-matrix accounting for the current thread.
///
/// `last_bytes` is the similarity storage of the most recent kernel call,
/// summed over batch and heads (`groups * n * m * 8`). That much is held
/// while a graph is recorded; without one a single `n x m` buffer is reused;
/// `peak_bytes` is the largest such value since the last reset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BufferStats {
    pub calls: u64,
    pub last_bytes: u64,
    pub peak_bytes: u64,
}

thread_local! {
    static STATS: Cell<BufferStats> = const { Cell::new(BufferStats { calls: 0, last_bytes: 0, peak_bytes: 0 }) };
}

pub fn buffer_stats() -> BufferStats {
    STATS.with(|s| s.get())
}

pub fn reset_buffer_stats() {
    STATS.with(|s| s.set(BufferStats::default()));
}

fn record(bytes: u64) {
    STATS.with(|s| {
        let mut st = s.get();
        st.calls += 1;
        st.last_bytes = bytes;
        st.peak_bytes = st.peak_bytes.max(bytes);
        s.set(st);
    });
}

/// Bytes of similarity storage for `groups` heads of `n` queries by `m` keys.
pub fn similarity_bytes(groups: usize, n: usize, m: usize) -> u64 {
    groups as u64 * n as u64 * m as u64 * 8
}

/// Additive logit term of [`attention_core`].
#[derive(Clone, Copy, Debug)]
pub enum LogitBias<'a> {
    None,
    /// `[G, n, m]`, added entry-wise.
    Dense(&'a Tensor),
    /// Per-axis scores over a `kh x kw` key grid: `h: [G, n, kh]`,
    /// `w: [G, n, kw]`; key `j = jy * kw + jx` receives `h[i, jy] + w[i, jx]`.
    Axial {
        h: &'a Tensor,
        w: &'a Tensor,
    },
}

/// Head dims up to this use per-query loops instead of GEMM, which pads
/// tiny inner dimensions to its register tile.
const ROWWISE_MAX_DIM: usize = 8;

#[cfg_attr(not(test), allow(dead_code))]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum Path {
    Auto,
    Gemm,
    RowWise,
}

/// `e^x` for `x <= 0`, relative error below 1e-15; branch-free so that
/// softmax rows vectorize (libm `exp` is an opaque call). Arguments below
/// -708 return 0.
#[inline(always)]
pub(crate) fn exp_nonpos(x: f64) -> f64 {
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    // adding 1.5 * 2^52 rounds to an integer held in the low mantissa bits
    const ROUND: f64 = 6_755_399_441_055_744.0;
    let xc = if x < -708.0 { -708.0 } else { x };
    let t = xc * std::f64::consts::LOG2_E + ROUND;
    let k = t - ROUND;
    let r = (xc - k * LN2_HI) - k * LN2_LO;
    // Taylor series to degree 12 on |r| <= ln2 / 2
    const INV_FACT: [f64; 13] = [
        1.0,
        1.0,
        0.5,
        1.666_666_666_666_666_6e-1,
        4.166_666_666_666_666_4e-2,
        8.333_333_333_333_333e-3,
        1.388_888_888_888_889e-3,
        1.984_126_984_126_984e-4,
        2.480_158_730_158_73e-5,
        2.755_731_922_398_589_3e-6,
        2.755_731_922_398_589e-7,
        2.505_210_838_544_172e-8,
        2.087_675_698_786_81e-9,
    ];
    let mut p = INV_FACT[12];
    p = p * r + INV_FACT[11];
    p = p * r + INV_FACT[10];
    p = p * r + INV_FACT[9];
    p = p * r + INV_FACT[8];
    p = p * r + INV_FACT[7];
    p = p * r + INV_FACT[6];
    p = p * r + INV_FACT[5];
    p = p * r + INV_FACT[4];
    p = p * r + INV_FACT[3];
    p = p * r + INV_FACT[2];
    p = p * r + INV_FACT[1];
    p = p * r + INV_FACT[0];
    let scale = f64::from_bits(t.to_bits().wrapping_add(1023) << 52);
    if x < -708.0 {
        0.0
    } else {
        p * scale
    }
}

fn softmax_row(z: &mut [f64]) {
    let mx = max(z);
    // separate passes: a fused running sum would block vectorization of exp
    z.iter_mut().for_each(|v| *v = exp_nonpos(*v - mx));
    let s = sum(z);
    let inv = 1.0 / s;
    z.iter_mut().for_each(|v| *v *= inv);
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

// Reductions below keep eight independent partial results so the loops
// are throughput- rather than latency-bound; the order is fixed, so results
// stay deterministic.

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

#[inline]
fn sum(a: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let c = a.chunks_exact(8);
    let tail: f64 = c.remainder().iter().sum();
    for x in c {
        for l in 0..8 {
            acc[l] += x[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

#[inline]
fn max(a: &[f64]) -> f64 {
    let mut acc = [f64::NEG_INFINITY; 8];
    let c = a.chunks_exact(8);
    let tail = c.remainder().iter().fold(f64::NEG_INFINITY, |m, &x| if x > m { x } else { m });
    for x in c {
        for l in 0..8 {
            acc[l] = if x[l] > acc[l] { x[l] } else { acc[l] };
        }
    }
    acc.iter().fold(tail, |m, &x| if x > m { x } else { m })
}

/// Fused scaled dot-product attention in channel-major layout.
///
/// `q: [G, d, n]`, `k: [G, d, m]`, `v: [G, dv, m]`. Returns `[G, dv, n]`
/// where column `i` is `sum_j P[i, j] v_j` and
/// `P = softmax_j((q_i . k_j + bias[i, j]) / sqrt(d))`.
///
/// When a graph is being recorded every group's `P` is kept for the backward
/// pass; otherwise a single `n x m` buffer is reused across groups.
pub fn attention_core(q: &Tensor, k: &Tensor, v: &Tensor, bias: LogitBias<'_>, cap_bytes: u64) -> Result<Tensor> {
    attention_core_with(q, k, v, bias, cap_bytes, Path::Auto)
}

pub(crate) fn attention_core_with(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    bias: LogitBias<'_>,
    cap_bytes: u64,
    path: Path,
) -> Result<Tensor> {
    let bad = || {
        Error::dim(
            "attention_core",
            format!("incompatible q {:?}, k {:?}, v {:?}, bias {:?}", q.shape(), k.shape(), v.shape(), bias),
        )
    };
    let (g, d, n) = match q.shape() {
        &[g, d, n] => (g, d, n),
        _ => return Err(bad()),
    };
    let m = match k.shape() {
        &[gk, dk, m] if gk == g && dk == d => m,
        _ => return Err(bad()),
    };
    let dv = match v.shape() {
        &[gv, dv, mv] if gv == g && mv == m => dv,
        _ => return Err(bad()),
    };
    let mut bias_inputs: Vec<&Tensor> = Vec::new();
    let axial = match bias {
        LogitBias::None => None,
        LogitBias::Dense(b) => {
            if b.shape() != [g, n, m] {
                return Err(bad());
            }
            bias_inputs.push(b);
            None
        }
        LogitBias::Axial { h, w } => {
            let (kh, kw) = match (h.shape(), w.shape()) {
                (&[gh, nh, kh], &[gw, nw, kw]) if gh == g && gw == g && nh == n && nw == n && kh * kw == m => (kh, kw),
                _ => return Err(bad()),
            };
            bias_inputs.push(h);
            bias_inputs.push(w);
            Some((kh, kw))
        }
    };
    let bytes = similarity_bytes(g, n, m);
    if bytes > cap_bytes {
        return Err(Error::Config(format!(
            "attention similarity buffer of {bytes} bytes ({g} heads x {n} x {m}) exceeds the cap of {cap_bytes} bytes"
        )));
    }
    let rowwise = match path {
        Path::Auto => d <= ROWWISE_MAX_DIM,
        Path::Gemm => false,
        Path::RowWise => true,
    };

    let scale = 1.0 / (d as f64).sqrt();
    let keep = grad_enabled()
        && (q.requires_grad()
            || k.requires_grad()
            || v.requires_grad()
            || bias_inputs.iter().any(|b| b.requires_grad()));
    let nm = n * m;
    let mut probs = vec![0.0; if keep { g * nm } else { nm }];
    let mut out = vec![0.0; g * dv * n];
    let (qd, kd, vd) = (q.data(), k.data(), v.data());
    for gi in 0..g {
        let p = if keep { &mut probs[gi * nm..(gi + 1) * nm] } else { &mut probs[..] };
        let qg = &qd[gi * d * n..(gi + 1) * d * n];
        let kg = &kd[gi * d * m..(gi + 1) * d * m];
        let vg = &vd[gi * dv * m..(gi + 1) * dv * m];
        let og = &mut out[gi * dv * n..(gi + 1) * dv * n];
        if !rowwise {
            // Z = Q^T K  (Q stored d x n, viewed as n x d)
            gemm(n, d, m, 1.0, qg, Layout::rm_t(n), kg, Layout::rm(m), 0.0, p, Layout::rm(m));
        }
        for (i, z) in p.chunks_mut(m).enumerate() {
            if rowwise {
                z.iter_mut().for_each(|v| *v = 0.0);
                for c in 0..d {
                    axpy(z, qg[c * n + i], &kg[c * m..(c + 1) * m]);
                }
            }
            match bias {
                LogitBias::None => {}
                LogitBias::Dense(b) => {
                    z.iter_mut().zip(&b.data()[(gi * n + i) * m..][..m]).for_each(|(z, b)| *z += b);
                }
                LogitBias::Axial { h, w } => {
                    let (kh, kw) = axial.unwrap();
                    let bh = &h.data()[(gi * n + i) * kh..][..kh];
                    let bw = &w.data()[(gi * n + i) * kw..][..kw];
                    for (zr, &hv) in z.chunks_mut(kw).zip(bh) {
                        zr.iter_mut().zip(bw).for_each(|(z, &wv)| *z += hv + wv);
                    }
                }
            }
            z.iter_mut().for_each(|v| *v *= scale);
            softmax_row(z);
            if rowwise {
                for c in 0..dv {
                    og[c * n + i] = dot(z, &vg[c * m..(c + 1) * m]);
                }
            }
        }
        if !rowwise {
            // O = V P^T  (dv x m) . (m x n)
            gemm(dv, m, n, 1.0, vg, Layout::rm(m), p, Layout::rm_t(m), 0.0, og, Layout::rm(n));
        }
    }
    record(bytes);

    let mut inputs = vec![q, k, v];
    inputs.extend(bias_inputs);
    Tensor::from_op("attention_core", out, vec![g, dv, n], &inputs, move |ctx| {
        let (qd, kd, vd) = (ctx.inputs[0].data(), ctx.inputs[1].data(), ctx.inputs[2].data());
        let mut dq = vec![0.0; g * d * n];
        let mut dk = vec![0.0; g * d * m];
        let mut dv_ = vec![0.0; g * dv * m];
        let mut dbias: Vec<Vec<f64>> = match axial {
            Some((kh, kw)) => vec![vec![0.0; g * n * kh], vec![0.0; g * n * kw]],
            None if ctx.inputs.len() == 4 => vec![vec![0.0; g * nm]],
            None => Vec::new(),
        };
        let mut dzbuf = vec![0.0; if rowwise { m } else { nm }];
        for gi in 0..g {
            let p = &probs[gi * nm..(gi + 1) * nm];
            let go = &ctx.grad[gi * dv * n..(gi + 1) * dv * n];
            let qg = &qd[gi * d * n..(gi + 1) * d * n];
            let kg = &kd[gi * d * m..(gi + 1) * d * m];
            let vg = &vd[gi * dv * m..(gi + 1) * dv * m];
            let dqg = &mut dq[gi * d * n..(gi + 1) * d * n];
            let dkg = &mut dk[gi * d * m..(gi + 1) * d * m];
            let dvg = &mut dv_[gi * dv * m..(gi + 1) * dv * m];
            if !rowwise {
                // dV = dO . P ;  dP = dO^T . V
                gemm(dv, n, m, 1.0, go, Layout::rm(n), p, Layout::rm(m), 0.0, dvg, Layout::rm(m));
                gemm(n, dv, m, 1.0, go, Layout::rm_t(n), vg, Layout::rm(m), 0.0, &mut dzbuf, Layout::rm(m));
            }
            for i in 0..n {
                let pr = &p[i * m..(i + 1) * m];
                let dz = if rowwise { &mut dzbuf[..] } else { &mut dzbuf[i * m..(i + 1) * m] };
                if rowwise {
                    dz.iter_mut().for_each(|v| *v = 0.0);
                    for c in 0..dv {
                        let gc = go[c * n + i];
                        axpy(dz, gc, &vg[c * m..(c + 1) * m]);
                        axpy(&mut dvg[c * m..(c + 1) * m], gc, pr);
                    }
                }
                // dZ = scale * P * (dP - rowdot(dP, P))
                let rd = dot(dz, pr);
                for (z, &pv) in dz.iter_mut().zip(pr) {
                    *z = scale * pv * (*z - rd);
                }
                match axial {
                    Some((kh, kw)) => {
                        let (bh, bw) = dbias.split_at_mut(1);
                        let bh = &mut bh[0][(gi * n + i) * kh..][..kh];
                        let bw = &mut bw[0][(gi * n + i) * kw..][..kw];
                        for (zr, hv) in dz.chunks(kw).zip(bh.iter_mut()) {
                            *hv = sum(zr);
                            bw.iter_mut().zip(zr).for_each(|(w, z)| *w += z);
                        }
                    }
                    None if !dbias.is_empty() => dbias[0][(gi * n + i) * m..][..m].copy_from_slice(dz),
                    None => {}
                }
                if rowwise {
                    for c in 0..d {
                        let kr = &kg[c * m..(c + 1) * m];
                        dqg[c * n + i] = dot(kr, dz);
                        axpy(&mut dkg[c * m..(c + 1) * m], qg[c * n + i], dz);
                    }
                }
            }
            if !rowwise {
                // dQ = K . dZ^T ;  dK = Q . dZ
                gemm(d, m, n, 1.0, kg, Layout::rm(m), &dzbuf, Layout::rm_t(m), 0.0, dqg, Layout::rm(n));
                gemm(d, n, m, 1.0, qg, Layout::rm(n), &dzbuf, Layout::rm(m), 0.0, dkg, Layout::rm(m));
            }
        }
        let mut grads = vec![Some(dq), Some(dk), Some(dv_)];
        grads.extend(dbias.into_iter().map(Some));
        grads
    })
}
