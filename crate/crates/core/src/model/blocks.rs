use std::rc::Rc;

use crate::attention::{decoder_cross_mhsa, efficient_mhsa, efficient_mhsa_relpos, AttentionConfig, AttentionWeights};
use crate::error::{Error, Result};
use crate::tensor::ops::{self, nchw, BatchNormStats};
use crate::tensor::Tensor;

const LN_EPS: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct BatchNormWeights {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub stats: Rc<BatchNormStats>,
}

impl BatchNormWeights {
    pub fn apply(&self, x: &Tensor, training: bool) -> Result<Tensor> {
        ops::batch_norm_2d(x, &self.gamma, &self.beta, &self.stats, training)
    }
}

#[derive(Clone, Debug)]
pub struct LayerNormWeights {
    pub gamma: Tensor,
    pub beta: Tensor,
}

impl LayerNormWeights {
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        ops::layer_norm_channels(x, &self.gamma, &self.beta, LN_EPS)
    }
}

/// Pre-activation residual block weights. `shortcut` is a 1x1 conv, present
/// when the block changes width or resolution.
#[derive(Clone, Debug)]
pub struct ResidualWeights {
    pub bn1: BatchNormWeights,
    pub conv1: Tensor,
    pub bn2: BatchNormWeights,
    pub conv2: Tensor,
    pub shortcut: Option<Tensor>,
}

/// `shortcut(x) + conv2(relu(bn2(conv1(relu(bn1(x))))))`, 3x3 convs with
/// padding 1; `conv1` and the shortcut carry the stride.
pub fn residual_block(x: &Tensor, w: &ResidualWeights, stride: usize, training: bool) -> Result<Tensor> {
    if stride != 1 && stride != 2 {
        return Err(Error::Config(format!("residual block stride must be 1 or 2, got {stride}")));
    }
    let (_, c, _, _) = nchw("residual_block", x)?;
    let h = ops::relu(&w.bn1.apply(x, training)?)?;
    let h = ops::conv2d(&h, &w.conv1, None, stride, 1)?;
    let h = ops::relu(&w.bn2.apply(&h, training)?)?;
    let h = ops::conv2d(&h, &w.conv2, None, 1, 1)?;
    let short = match &w.shortcut {
        Some(s) => ops::conv2d(x, s, None, stride, 0)?,
        None if stride == 1 && w.conv2.shape()[0] == c => x.clone(),
        None => {
            return Err(Error::Config(format!(
                "identity shortcut needs stride 1 and equal widths (got stride {stride}, {c} -> {})",
                w.conv2.shape()[0]
            )))
        }
    };
    ops::add(&short, &h)
}

/// Two 1x1 convs with biases and GELU between.
#[derive(Clone, Debug)]
pub struct FfnWeights {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

impl FfnWeights {
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let h = ops::gelu(&ops::conv2d(x, &self.w1, Some(&self.b1), 1, 0)?)?;
        ops::conv2d(&h, &self.w2, Some(&self.b2), 1, 0)
    }
}

#[derive(Clone, Debug)]
pub struct EncoderWeights {
    pub ln1: LayerNormWeights,
    pub attn: AttentionWeights,
    pub ln2: LayerNormWeights,
    pub ffn: FfnWeights,
}

/// `y = x + MHSA(LN(x)); y + FFN(LN(y))`. The attention is the efficient
/// variant, with relative logits when `cfg.use_relpos`.
pub fn transformer_encoder_block(x: &Tensor, w: &EncoderWeights, cfg: &AttentionConfig) -> Result<Tensor> {
    let n = w.ln1.apply(x)?;
    let a = if cfg.use_relpos { efficient_mhsa_relpos(&n, &w.attn, cfg)? } else { efficient_mhsa(&n, &w.attn, cfg)? };
    let y = ops::add(x, &a)?;
    let f = w.ffn.apply(&w.ln2.apply(&y)?)?;
    ops::add(&y, &f)
}

#[derive(Clone, Debug)]
pub struct DecoderWeights {
    pub ln_hi: LayerNormWeights,
    pub ln_lo: LayerNormWeights,
    pub attn: AttentionWeights,
    /// 1x1 conv mapping the coarse stream to the skip width before upsampling.
    pub conv_ch: Tensor,
    pub ln2: LayerNormWeights,
    pub ffn: FfnWeights,
}

/// `y = cross_MHSA(LN(hi), LN(lo)) + up(conv_ch(lo)); y + FFN(LN(y))`, where
/// queries come from the skip `hi`, keys/values from the decoder stream
/// `lo` (exactly half `hi`'s resolution), and `up` is bilinear x2.
pub fn transformer_decoder_block(
    hi: &Tensor,
    lo: &Tensor,
    w: &DecoderWeights,
    cfg: &AttentionConfig,
) -> Result<Tensor> {
    let (_, _, h, wd) = nchw("transformer_decoder_block", hi)?;
    let (_, _, lh, lw) = nchw("transformer_decoder_block", lo)?;
    if lh * 2 != h || lw * 2 != wd {
        return Err(Error::Config(format!(
            "decoder block expects the decoder stream at half the skip resolution: skip {h}x{wd}, stream {lh}x{lw}"
        )));
    }
    let residue = ops::bilinear_resize(&ops::conv2d(lo, &w.conv_ch, None, 1, 0)?, h, wd)?;
    let a = decoder_cross_mhsa(&w.ln_hi.apply(hi)?, &w.ln_lo.apply(lo)?, &w.attn, cfg)?;
    let y = ops::add(&a, &residue)?;
    let f = w.ffn.apply(&w.ln2.apply(&y)?)?;
    ops::add(&y, &f)
}
