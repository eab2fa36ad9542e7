use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::ops::{self, nchw};
use crate::tensor::Tensor;

use super::config::{AttentionConfig, Projection};
use super::kernel::{attention_core, LogitBias};
use super::relpos::{relative_axis_scores, RelAxis, RelativePositionTable};

/// 1x1 projection weights of one attention layer. Queries come from a
/// `c_q`-channel map, keys and values from a `c_kv`-channel map; the inner
/// width equals `c_q` and the output projection maps back to `c_q`.
#[derive(Clone, Debug)]
pub struct AttentionWeights {
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
    pub wo: Tensor,
    pub rel: Option<RelativePositionTable>,
}

impl AttentionWeights {
    /// Gaussian projections with std `1/sqrt(fan_in)`; relative tables
    /// (when `cfg.use_relpos`) start at zero.
    pub fn random(c_q: usize, c_kv: usize, cfg: &AttentionConfig, rng: &mut SplitMix64) -> Result<Self> {
        let d = cfg.head_dim(c_q)?;
        let conv = |o: usize, i: usize, rng: &mut SplitMix64| {
            Tensor::param(Tensor::randn(&[o, i, 1, 1], 1.0 / (i as f64).sqrt(), rng).to_vec(), &[o, i, 1, 1])
        };
        Ok(AttentionWeights {
            wq: conv(c_q, c_q, rng)?,
            wk: conv(c_q, c_kv, rng)?,
            wv: conv(c_q, c_kv, rng)?,
            wo: conv(c_q, c_q, rng)?,
            rel: if cfg.use_relpos {
                Some(RelativePositionTable::zeros(cfg.heads, cfg.reduced_size, d)?)
            } else {
                None
            },
        })
    }

    pub fn query_channels(&self) -> usize {
        self.wq.shape()[1]
    }

    pub fn kv_channels(&self) -> usize {
        self.wk.shape()[1]
    }
}

/// `[B, heads * d, H, W] -> [B * heads, d, H * W]`.
pub fn split_heads(t: &Tensor, heads: usize) -> Result<Tensor> {
    let (b, c, h, w) = nchw("split_heads", t)?;
    if heads == 0 || c % heads != 0 {
        return Err(Error::dim("split_heads", format!("{c} channels not divisible by {heads} heads")));
    }
    ops::reshape(t, &[b * heads, c / heads, h * w])
}

/// Inverse of [`split_heads`].
pub fn merge_heads(t: &Tensor, batch: usize, h: usize, w: usize) -> Result<Tensor> {
    let (g, d, n) = match t.shape() {
        &[g, d, n] => (g, d, n),
        s => return Err(Error::dim("merge_heads", format!("expected [G, d, n], got {s:?}"))),
    };
    if batch == 0 || g % batch != 0 || n != h * w {
        return Err(Error::dim("merge_heads", format!("{:?} cannot form batch {batch} of {h}x{w}", t.shape())));
    }
    ops::reshape(t, &[batch, g / batch * d, h, w])
}

/// Spatially reduces projected keys and values to the `reduced_size` grid
/// (clamped to the input extent).
pub fn project_kv(k: &Tensor, v: &Tensor, cfg: &AttentionConfig) -> Result<(Tensor, Tensor)> {
    let (_, _, h, w) = nchw("project_kv", k)?;
    let (rh, rw) = cfg.reduced_grid(h, w);
    let f = |t: &Tensor| match cfg.projection {
        Projection::Bilinear => ops::bilinear_resize(t, rh, rw),
        Projection::Maxpool => ops::adaptive_max_pool_2d(t, rh, rw),
    };
    Ok((f(k)?, f(v)?))
}

fn attend(
    q_src: &Tensor,
    kv_src: &Tensor,
    wts: &AttentionWeights,
    cfg: &AttentionConfig,
    project: bool,
    relpos: bool,
) -> Result<Tensor> {
    let (b, c, h, w) = nchw("mhsa", q_src)?;
    let (bk, ckv, _, _) = nchw("mhsa", kv_src)?;
    if bk != b {
        return Err(Error::dim("mhsa", format!("query batch {b} vs key/value batch {bk}")));
    }
    if wts.query_channels() != c || wts.kv_channels() != ckv {
        return Err(Error::Config(format!(
            "attention weights expect {} query / {} key-value channels, got {c} / {ckv}",
            wts.query_channels(),
            wts.kv_channels()
        )));
    }
    cfg.head_dim(wts.wq.shape()[0])?;
    let q = ops::conv2d(q_src, &wts.wq, None, 1, 0)?;
    let mut k = ops::conv2d(kv_src, &wts.wk, None, 1, 0)?;
    let mut v = ops::conv2d(kv_src, &wts.wv, None, 1, 0)?;
    if project {
        (k, v) = project_kv(&k, &v, cfg)?;
    }
    let (kh, kw) = (k.shape()[2], k.shape()[3]);
    let qh = split_heads(&q, cfg.heads)?;
    let kh_ = split_heads(&k, cfg.heads)?;
    let vh = split_heads(&v, cfg.heads)?;
    let scores = if relpos {
        let table = wts
            .rel
            .as_ref()
            .ok_or_else(|| Error::Config("relative position encoding requested but weights have no tables".into()))?;
        Some((
            relative_axis_scores(&qh, &table.r_h, (h, w), (kh, kw), RelAxis::Height)?,
            relative_axis_scores(&qh, &table.r_w, (h, w), (kh, kw), RelAxis::Width)?,
        ))
    } else {
        None
    };
    let bias = match &scores {
        Some((sh, sw)) => LogitBias::Axial { h: sh, w: sw },
        None => LogitBias::None,
    };
    let o = attention_core(&qh, &kh_, &vh, bias, cfg.buffer_cap_bytes)?;
    let o = merge_heads(&o, b, h, w)?;
    ops::conv2d(&o, &wts.wo, None, 1, 0)
}

/// Full `n x n` self-attention (no projection, no positional term).
pub fn standard_mhsa(x: &Tensor, wts: &AttentionWeights, cfg: &AttentionConfig) -> Result<Tensor> {
    attend(x, x, wts, cfg, false, false)
}

/// Self-attention against keys/values projected to the reduced grid.
pub fn efficient_mhsa(x: &Tensor, wts: &AttentionWeights, cfg: &AttentionConfig) -> Result<Tensor> {
    attend(x, x, wts, cfg, true, false)
}

/// [`efficient_mhsa`] plus the two-axis relative-position logits.
pub fn efficient_mhsa_relpos(x: &Tensor, wts: &AttentionWeights, cfg: &AttentionConfig) -> Result<Tensor> {
    attend(x, x, wts, cfg, true, true)
}

/// Cross attention: queries from the high-resolution skip map `hi`, keys and
/// values from the coarser decoder map `lo`. Output has `hi`'s shape.
/// Relative logits are added when `cfg.use_relpos`.
pub fn decoder_cross_mhsa(hi: &Tensor, lo: &Tensor, wts: &AttentionWeights, cfg: &AttentionConfig) -> Result<Tensor> {
    let (_, _, h, w) = nchw("decoder_cross_mhsa", hi)?;
    let (_, _, lh, lw) = nchw("decoder_cross_mhsa", lo)?;
    if lh >= h || lw >= w {
        return Err(Error::Config(format!(
            "decoder attention needs a coarser key/value map: skip is {h}x{w}, decoder stream is {lh}x{lw}"
        )));
    }
    attend(hi, lo, wts, cfg, true, cfg.use_relpos)
}
