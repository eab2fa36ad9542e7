use crate::attention::{AttentionConfig, AttentionWeights, RelativePositionTable};
use crate::error::{Error, Result};
use crate::tensor::ops::{self, nchw};
use crate::tensor::{no_grad, Tensor};

use super::blocks::{
    residual_block, transformer_decoder_block, transformer_encoder_block, BatchNormWeights, DecoderWeights,
    EncoderWeights, FfnWeights, LayerNormWeights, ResidualWeights,
};
use super::config::UTNetConfig;
use super::params::{BufferStore, Census, Init, ParamKind, ParamStore};

/// U-shaped network: residual encoder with optional transformer encoder
/// blocks per depth, decoder that merges each skip either through a
/// transformer decoder block or a 1x1-conv + bilinear upsampling, and a
/// BN-ReLU-1x1 classification head.
///
/// Parameter names are stable across configurations (`inc.w`,
/// `enc{l}.res.*`, `enc{l}.trans.*`, `attn.enc{l}.*`, `dec{l}.up.w`,
/// `dec{l}.trans.*`, `attn.dec{l}.*`,
/// `dec{l}.res.*`, `head.*`), so a network with no attention depths is
/// parameter-for-parameter the residual baseline.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: UTNetConfig,
    pub seed: u64,
    pub params: ParamStore,
    pub buffers: BufferStore,
    active: Vec<usize>,
}

struct Builder<'a> {
    seed: u64,
    params: &'a mut ParamStore,
    buffers: &'a mut BufferStore,
}

impl Builder<'_> {
    fn p(&mut self, name: String, shape: &[usize], init: Init, kind: ParamKind) -> Result<()> {
        self.params.init(self.seed, &name, shape, init, kind).map(|_| ())
    }

    fn bn(&mut self, pre: &str, c: usize) -> Result<()> {
        self.p(format!("{pre}.gamma"), &[c], Init::Ones, ParamKind::Norm)?;
        self.p(format!("{pre}.beta"), &[c], Init::Zeros, ParamKind::Norm)?;
        self.buffers.register(pre, c);
        Ok(())
    }

    fn ln(&mut self, pre: &str, c: usize) -> Result<()> {
        self.p(format!("{pre}.gamma"), &[c], Init::Ones, ParamKind::Norm)?;
        self.p(format!("{pre}.beta"), &[c], Init::Zeros, ParamKind::Norm)
    }

    fn residual(&mut self, pre: &str, cin: usize, cout: usize, stride: usize) -> Result<()> {
        self.bn(&format!("{pre}.bn1"), cin)?;
        self.p(format!("{pre}.conv1"), &[cout, cin, 3, 3], Init::He, ParamKind::Conv)?;
        self.bn(&format!("{pre}.bn2"), cout)?;
        self.p(format!("{pre}.conv2"), &[cout, cout, 3, 3], Init::He, ParamKind::Conv)?;
        if stride != 1 || cin != cout {
            self.p(format!("{pre}.shortcut"), &[cout, cin, 1, 1], Init::He, ParamKind::Conv)?;
        }
        Ok(())
    }

    fn attention(&mut self, pre: &str, cq: usize, ckv: usize, cfg: &AttentionConfig) -> Result<()> {
        for (n, cin) in [("wq", cq), ("wk", ckv), ("wv", ckv), ("wo", cq)] {
            self.p(format!("{pre}.{n}"), &[cq, cin, 1, 1], Init::Lecun, ParamKind::Attention)?;
        }
        if cfg.use_relpos {
            let d = cfg.head_dim(cq)?;
            let shape = [cfg.heads, 2 * cfg.reduced_size - 1, d];
            self.p(format!("{pre}.rel_h"), &shape, Init::Zeros, ParamKind::RelPos)?;
            self.p(format!("{pre}.rel_w"), &shape, Init::Zeros, ParamKind::RelPos)?;
        }
        Ok(())
    }

    fn ffn(&mut self, pre: &str, c: usize, expansion: usize) -> Result<()> {
        let hidden = c * expansion;
        self.p(format!("{pre}.w1"), &[hidden, c, 1, 1], Init::Lecun, ParamKind::Ffn)?;
        self.p(format!("{pre}.b1"), &[hidden], Init::Zeros, ParamKind::Ffn)?;
        self.p(format!("{pre}.w2"), &[c, hidden, 1, 1], Init::Lecun, ParamKind::Ffn)?;
        self.p(format!("{pre}.b2"), &[c], Init::Zeros, ParamKind::Ffn)
    }
}

impl Model {
    pub fn build(config: &UTNetConfig, seed: u64) -> Result<Model> {
        config.validate()?;
        let active = config.active_levels()?;
        let widths = config.widths();
        let mut params = ParamStore::new();
        let mut buffers = BufferStore::default();
        let mut b = Builder { seed, params: &mut params, buffers: &mut buffers };
        let acfg = &config.attention;
        let e = config.ffn_expansion;

        b.p("inc.w".into(), &[widths[0], config.in_channels, 3, 3], Init::He, ParamKind::Conv)?;
        b.residual("enc0.res", widths[0], widths[0], 1)?;
        for l in 1..config.levels {
            b.residual(&format!("enc{l}.res"), widths[l - 1], widths[l], 2)?;
            if active.contains(&l) {
                let pre = format!("enc{l}.trans");
                b.ln(&format!("{pre}.ln1"), widths[l])?;
                b.attention(&format!("attn.enc{l}"), widths[l], widths[l], acfg)?;
                b.ln(&format!("{pre}.ln2"), widths[l])?;
                b.ffn(&format!("{pre}.ffn"), widths[l], e)?;
            }
        }
        for l in (0..config.levels - 1).rev() {
            let (c, clo) = (widths[l], widths[l + 1]);
            if active.contains(&(l + 1)) {
                let pre = format!("dec{l}.trans");
                b.ln(&format!("{pre}.ln_hi"), c)?;
                b.ln(&format!("{pre}.ln_lo"), clo)?;
                b.attention(&format!("attn.dec{l}"), c, clo, acfg)?;
                b.p(format!("{pre}.conv_ch"), &[c, clo, 1, 1], Init::He, ParamKind::Conv)?;
                b.ln(&format!("{pre}.ln2"), c)?;
                b.ffn(&format!("{pre}.ffn"), c, e)?;
            } else {
                b.p(format!("dec{l}.up.w"), &[c, clo, 1, 1], Init::He, ParamKind::Conv)?;
            }
            b.residual(&format!("dec{l}.res"), 2 * c, c, 1)?;
        }
        b.bn("head.bn", widths[0])?;
        b.p("head.w".into(), &[config.num_classes, widths[0], 1, 1], Init::Lecun, ParamKind::Conv)?;
        b.p("head.b".into(), &[config.num_classes], Init::Zeros, ParamKind::Conv)?;

        Ok(Model { config: config.clone(), seed, params, buffers, active })
    }

    pub fn census(&self) -> Census {
        self.params.census()
    }

    pub fn num_params(&self) -> usize {
        self.params.census().total
    }

    pub fn active_levels(&self) -> &[usize] {
        &self.active
    }

    fn get(&self, name: String) -> Result<Tensor> {
        self.params.get(&name).cloned()
    }

    fn bn_w(&self, pre: &str) -> Result<BatchNormWeights> {
        Ok(BatchNormWeights {
            gamma: self.get(format!("{pre}.gamma"))?,
            beta: self.get(format!("{pre}.beta"))?,
            stats: self.buffers.get(pre)?,
        })
    }

    fn ln_w(&self, pre: &str) -> Result<LayerNormWeights> {
        Ok(LayerNormWeights { gamma: self.get(format!("{pre}.gamma"))?, beta: self.get(format!("{pre}.beta"))? })
    }

    /// Weights of the residual block registered under `pre`.
    pub fn residual_weights(&self, pre: &str) -> Result<ResidualWeights> {
        let sc = format!("{pre}.shortcut");
        Ok(ResidualWeights {
            bn1: self.bn_w(&format!("{pre}.bn1"))?,
            conv1: self.get(format!("{pre}.conv1"))?,
            bn2: self.bn_w(&format!("{pre}.bn2"))?,
            conv2: self.get(format!("{pre}.conv2"))?,
            shortcut: if self.params.contains(&sc) { Some(self.get(sc)?) } else { None },
        })
    }

    fn attn_w(&self, pre: &str) -> Result<AttentionWeights> {
        let rel = if self.params.contains(&format!("{pre}.rel_h")) {
            Some(RelativePositionTable {
                r_h: self.get(format!("{pre}.rel_h"))?,
                r_w: self.get(format!("{pre}.rel_w"))?,
            })
        } else {
            None
        };
        Ok(AttentionWeights {
            wq: self.get(format!("{pre}.wq"))?,
            wk: self.get(format!("{pre}.wk"))?,
            wv: self.get(format!("{pre}.wv"))?,
            wo: self.get(format!("{pre}.wo"))?,
            rel,
        })
    }

    fn ffn_w(&self, pre: &str) -> Result<FfnWeights> {
        Ok(FfnWeights {
            w1: self.get(format!("{pre}.w1"))?,
            b1: self.get(format!("{pre}.b1"))?,
            w2: self.get(format!("{pre}.w2"))?,
            b2: self.get(format!("{pre}.b2"))?,
        })
    }

    pub fn encoder_weights(&self, level: usize) -> Result<EncoderWeights> {
        let pre = format!("enc{level}.trans");
        Ok(EncoderWeights {
            ln1: self.ln_w(&format!("{pre}.ln1"))?,
            attn: self.attn_w(&format!("attn.enc{level}"))?,
            ln2: self.ln_w(&format!("{pre}.ln2"))?,
            ffn: self.ffn_w(&format!("{pre}.ffn"))?,
        })
    }

    pub fn decoder_weights(&self, level: usize) -> Result<DecoderWeights> {
        let pre = format!("dec{level}.trans");
        Ok(DecoderWeights {
            ln_hi: self.ln_w(&format!("{pre}.ln_hi"))?,
            ln_lo: self.ln_w(&format!("{pre}.ln_lo"))?,
            attn: self.attn_w(&format!("attn.dec{level}"))?,
            conv_ch: self.get(format!("{pre}.conv_ch"))?,
            ln2: self.ln_w(&format!("{pre}.ln2"))?,
            ffn: self.ffn_w(&format!("{pre}.ffn"))?,
        })
    }

    /// Logits `[B, num_classes, H, W]`. `training` selects batch statistics
    /// (and updates the running estimates) versus running statistics.
    pub fn forward(&self, x: &Tensor, training: bool) -> Result<Tensor> {
        let (_, c, h, w) = nchw("forward", x)?;
        let cfg = &self.config;
        if c != cfg.in_channels {
            return Err(Error::Data(format!("input has {c} channels, model expects {}", cfg.in_channels)));
        }
        let mult = cfg.size_multiple();
        if h % mult != 0 || w % mult != 0 {
            return Err(Error::Data(format!(
                "input {h}x{w} must be a multiple of {mult} in both dimensions ({} resolutions)",
                cfg.levels
            )));
        }
        let acfg = &cfg.attention;
        let mut feats = Vec::with_capacity(cfg.levels);
        let mut t = ops::conv2d(x, &self.get("inc.w".into())?, None, 1, 1)?;
        t = residual_block(&t, &self.residual_weights("enc0.res")?, 1, training)?;
        feats.push(t.clone());
        for l in 1..cfg.levels {
            t = residual_block(&t, &self.residual_weights(&format!("enc{l}.res"))?, 2, training)?;
            if self.active.contains(&l) {
                t = transformer_encoder_block(&t, &self.encoder_weights(l)?, acfg)?;
            }
            feats.push(t.clone());
        }
        for l in (0..cfg.levels - 1).rev() {
            let skip = &feats[l];
            let (sh, sw) = (skip.shape()[2], skip.shape()[3]);
            let up = if self.active.contains(&(l + 1)) {
                transformer_decoder_block(skip, &t, &self.decoder_weights(l)?, acfg)?
            } else {
                let u = ops::conv2d(&t, &self.get(format!("dec{l}.up.w"))?, None, 1, 0)?;
                ops::bilinear_resize(&u, sh, sw)?
            };
            t = ops::concat(&[&up, skip], 1)?;
            t = residual_block(&t, &self.residual_weights(&format!("dec{l}.res"))?, 1, training)?;
        }
        let t = ops::relu(&self.bn_w("head.bn")?.apply(&t, training)?)?;
        ops::conv2d(&t, &self.get("head.w".into())?, Some(&self.get("head.b".into())?), 1, 0)
    }

    /// Eval-mode forward without recording a graph.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        no_grad(|| self.forward(x, false))
    }
}
