use std::fmt::Write as _;

use crate::attention::{
    attention_core, decoder_cross_mhsa, efficient_mhsa, efficient_mhsa_relpos, relative_logits, standard_mhsa,
    AttentionConfig, AttentionWeights, LogitBias, RelativePositionTable,
};
use crate::error::{Error, Result};
use crate::model::{residual_block, transformer_decoder_block, transformer_encoder_block, Model, UTNetConfig};
use crate::rng::SplitMix64;
use crate::tensor::gradcheck::GradCheckReport;
use crate::tensor::ops::BatchNormStats;
use crate::tensor::{grad_check_coords, ops, Tensor};
use crate::train::{combined_loss, dice_loss};

/// Relative-error threshold for primitives, blocks and attention variants.
pub const OP_THRESHOLD: f64 = 1e-5;
/// Threshold for the whole network.
pub const MODEL_THRESHOLD: f64 = 1e-4;
const EPS: f64 = 1e-5;

type CheckFn = Box<dyn Fn() -> Result<GradCheckReport>>;

/// One named gradient check.
pub struct GradCheckCase {
    pub name: String,
    pub threshold: f64,
    run: CheckFn,
}

impl GradCheckCase {
    pub fn new(name: &str, threshold: f64, run: impl Fn() -> Result<GradCheckReport> + 'static) -> Self {
        GradCheckCase { name: name.into(), threshold, run: Box::new(run) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckRow {
    pub name: String,
    pub threshold: f64,
    /// `Err` carries the message of a check that could not run.
    pub outcome: std::result::Result<GradCheckReport, String>,
}

impl GradCheckRow {
    pub fn passed(&self) -> bool {
        matches!(&self.outcome, Ok(r) if r.max_rel_err < self.threshold)
    }
}

fn randn(shape: &[usize], seed: u64) -> Tensor {
    Tensor::randn(shape, 1.0, &mut SplitMix64::new(seed))
}

/// Scalar probe `sum(y * r)` with a fixed random `r`, so every output
/// element contributes with a distinct weight.
fn probe(y: &Tensor) -> Result<Tensor> {
    let r = randn(y.shape(), 0xBEEF ^ y.numel() as u64);
    ops::sum_all(&ops::mul(y, &r)?)
}

fn check(x: &Tensor, f: impl Fn(&Tensor) -> Result<Tensor>) -> Result<GradCheckReport> {
    grad_check_coords(|t| probe(&f(t)?), x, EPS, None)
}

/// Positive values away from zero, for division and similar.
fn positive(shape: &[usize], seed: u64) -> Tensor {
    let r = randn(shape, seed);
    Tensor::from_fn(shape, |i| 0.5 + r.data()[i].abs())
}

fn small_model() -> Result<Model> {
    let cfg = UTNetConfig {
        base_channels: 4,
        levels: 3,
        attention_levels: "12".into(),
        attention: AttentionConfig { heads: 2, reduced_size: 2, ..AttentionConfig::default() },
        ffn_expansion: 2,
        ..UTNetConfig::default()
    };
    Model::build(&cfg, 5)
}

fn attn_cfg(relpos: bool) -> AttentionConfig {
    AttentionConfig { heads: 2, reduced_size: 3, use_relpos: relpos, ..AttentionConfig::default() }
}

/// Attention weights with non-zero relative tables so the positional path
/// carries gradient.
fn attn_weights(cq: usize, ckv: usize, relpos: bool) -> Result<AttentionWeights> {
    let cfg = attn_cfg(relpos);
    let mut rng = SplitMix64::new(31);
    let mut w = AttentionWeights::random(cq, ckv, &cfg, &mut rng)?;
    if relpos {
        w.rel = Some(RelativePositionTable::random(cfg.heads, cfg.reduced_size, cq / cfg.heads, 0.5, &mut rng)?);
    }
    Ok(w)
}

/// Every registered check: primitives, attention kernel and variants,
/// network blocks, losses, and the full network.
pub fn registry() -> Vec<GradCheckCase> {
    let t = OP_THRESHOLD;
    let mut v = vec![
        GradCheckCase::new("add", t, || check(&randn(&[3, 4], 1), |x| ops::add(x, &randn(&[3, 4], 2)))),
        GradCheckCase::new("sub", t, || check(&randn(&[3, 4], 3), |x| ops::sub(&randn(&[3, 4], 4), x))),
        GradCheckCase::new("mul", t, || check(&randn(&[3, 4], 5), |x| ops::mul(x, x))),
        GradCheckCase::new("div", t, || check(&positive(&[3, 4], 6), |x| ops::div(&randn(&[3, 4], 7), x))),
        GradCheckCase::new("add_scalar", t, || check(&randn(&[5], 8), |x| ops::add_scalar(x, 0.7))),
        GradCheckCase::new("mul_scalar", t, || check(&randn(&[5], 9), |x| ops::mul_scalar(x, -1.3))),
        GradCheckCase::new("relu", t, || check(&randn(&[4, 5], 10), ops::relu)),
        GradCheckCase::new("gelu", t, || check(&randn(&[4, 5], 11), ops::gelu)),
        GradCheckCase::new("matmul", t, || {
            let b = randn(&[4, 2], 13);
            check(&randn(&[3, 4], 12), move |x| ops::matmul(x, &b))
        }),
        GradCheckCase::new("conv2d", t, || {
            let w = randn(&[3, 2, 3, 3], 15);
            let b = randn(&[3], 16);
            check(&randn(&[2, 2, 5, 5], 14), move |x| ops::conv2d(x, &w, Some(&b), 1, 1))
        }),
        GradCheckCase::new("conv2d_stride2_weights", t, || {
            let x = randn(&[2, 2, 6, 6], 17);
            check(&randn(&[3, 2, 3, 3], 18), move |w| ops::conv2d(&x, w, None, 2, 1))
        }),
        GradCheckCase::new("bilinear_resize", t, || {
            check(&randn(&[1, 2, 3, 5], 19), |x| ops::bilinear_resize(x, 7, 4))
        }),
        GradCheckCase::new("adaptive_max_pool_2d", t, || {
            check(&randn(&[1, 2, 7, 6], 20), |x| ops::adaptive_max_pool_2d(x, 3, 4))
        }),
        GradCheckCase::new("max_pool_2d", t, || check(&randn(&[1, 2, 6, 4], 21), ops::max_pool_2d)),
        GradCheckCase::new("batch_norm_2d", t, || {
            let (g, b) = (positive(&[3], 23), randn(&[3], 24));
            check(&randn(&[2, 3, 3, 3], 22), move |x| ops::batch_norm_2d(x, &g, &b, &BatchNormStats::new(3), true))
        }),
        GradCheckCase::new("layer_norm_channels", t, || {
            let (g, b) = (positive(&[4], 26), randn(&[4], 27));
            check(&randn(&[2, 4, 2, 3], 25), move |x| ops::layer_norm_channels(x, &g, &b, 1e-5))
        }),
        GradCheckCase::new("softmax", t, || check(&randn(&[3, 4, 2], 28), |x| ops::softmax(x, 1))),
        GradCheckCase::new("cross_entropy", t, || {
            let labels = [0u8, 2, 1, 1, 0, 2];
            grad_check_coords(move |x| ops::cross_entropy_with_logits(x, &labels), &randn(&[2, 3, 3], 29), EPS, None)
        }),
        GradCheckCase::new("sum_axes", t, || check(&randn(&[2, 3, 4], 30), |x| ops::sum_axes(x, &[0, 2]))),
        GradCheckCase::new("sum_all", t, || {
            grad_check_coords(|x| ops::sum_all(&ops::mul(x, x)?), &randn(&[3, 3], 0x5A), EPS, None)
        }),
        GradCheckCase::new("mean_all", t, || grad_check_coords(ops::mean_all, &randn(&[3, 3], 31), EPS, None)),
        GradCheckCase::new("reshape", t, || check(&randn(&[2, 6], 32), |x| ops::reshape(x, &[3, 4]))),
        GradCheckCase::new("permute", t, || check(&randn(&[2, 3, 4], 33), |x| ops::permute(x, &[2, 0, 1]))),
        GradCheckCase::new("transpose", t, || check(&randn(&[2, 3, 4], 34), |x| ops::transpose(x, 0, 2))),
        GradCheckCase::new("concat", t, || {
            let other = randn(&[2, 1, 3], 36);
            check(&randn(&[2, 2, 3], 35), move |x| ops::concat(&[x, &other], 1))
        }),
        GradCheckCase::new("attention_core", t, || {
            let (k, v) = (randn(&[2, 3, 5], 38), randn(&[2, 4, 5], 39));
            check(&randn(&[2, 3, 6], 37), move |q| attention_core(q, &k, &v, LogitBias::None, u64::MAX))
        }),
        GradCheckCase::new("attention_core_dense_bias", t, || {
            let (q, k, v) = (randn(&[2, 3, 6], 40), randn(&[2, 3, 5], 41), randn(&[2, 4, 5], 42));
            check(&randn(&[2, 6, 5], 43), move |b| attention_core(&q, &k, &v, LogitBias::Dense(b), u64::MAX))
        }),
        GradCheckCase::new("relative_logits", t, || {
            let table = RelativePositionTable::random(2, 3, 4, 0.7, &mut SplitMix64::new(45))?;
            check(&randn(&[2, 4, 12], 44), move |q| {
                let (h, w) = relative_logits(q, &table, (3, 4), (3, 3))?;
                ops::add(&h, &w)
            })
        }),
        GradCheckCase::new("relative_logits_table", t, || {
            let q = randn(&[2, 4, 12], 46);
            check(&randn(&[2, 5, 4], 47), move |r| {
                let table = RelativePositionTable { r_h: r.clone(), r_w: r.clone() };
                let (h, w) = relative_logits(&q, &table, (3, 4), (3, 3))?;
                ops::add(&h, &w)
            })
        }),
        GradCheckCase::new("standard_mhsa", t, || {
            let w = attn_weights(4, 4, false)?;
            check(&randn(&[1, 4, 4, 5], 48), move |x| standard_mhsa(x, &w, &attn_cfg(false)))
        }),
        GradCheckCase::new("efficient_mhsa", t, || {
            let w = attn_weights(4, 4, false)?;
            check(&randn(&[1, 4, 6, 5], 49), move |x| efficient_mhsa(x, &w, &attn_cfg(false)))
        }),
        GradCheckCase::new("efficient_mhsa_relpos", t, || {
            let w = attn_weights(4, 4, true)?;
            check(&randn(&[1, 4, 6, 5], 50), move |x| efficient_mhsa_relpos(x, &w, &attn_cfg(true)))
        }),
        GradCheckCase::new("decoder_cross_mhsa", t, || {
            let w = attn_weights(4, 6, true)?;
            let lo = randn(&[1, 6, 3, 3], 52);
            check(&randn(&[1, 4, 6, 6], 51), move |hi| decoder_cross_mhsa(hi, &lo, &w, &attn_cfg(true)))
        }),
        GradCheckCase::new("decoder_cross_mhsa_kv", t, || {
            let w = attn_weights(4, 6, true)?;
            let hi = randn(&[1, 4, 6, 6], 53);
            check(&randn(&[1, 6, 3, 3], 54), move |lo| decoder_cross_mhsa(&hi, lo, &w, &attn_cfg(true)))
        }),
        GradCheckCase::new("residual_block", t, || {
            let m = small_model()?;
            let w = m.residual_weights("enc1.res")?;
            check(&randn(&[2, 4, 6, 6], 55), move |x| residual_block(x, &w, 2, true))
        }),
        GradCheckCase::new("transformer_encoder_block", t, || {
            let m = small_model()?;
            let (w, cfg) = (m.encoder_weights(1)?, m.config.attention.clone());
            check(&randn(&[1, 8, 4, 4], 56), move |x| transformer_encoder_block(x, &w, &cfg))
        }),
        GradCheckCase::new("transformer_decoder_block", t, || {
            let m = small_model()?;
            let (w, cfg) = (m.decoder_weights(0)?, m.config.attention.clone());
            let lo = randn(&[1, 8, 3, 3], 58);
            check(&randn(&[1, 4, 6, 6], 57), move |hi| transformer_decoder_block(hi, &lo, &w, &cfg))
        }),
        GradCheckCase::new("dice_loss", t, || {
            let labels: Vec<u8> = (0..18).map(|i| (i * 7 % 4) as u8).collect();
            grad_check_coords(move |x| dice_loss(x, &labels), &randn(&[2, 4, 3, 3], 59), EPS, None)
        }),
        GradCheckCase::new("combined_loss", t, || {
            let labels: Vec<u8> = (0..18).map(|i| (i * 5 % 4) as u8).collect();
            grad_check_coords(move |x| combined_loss(x, &labels), &randn(&[2, 4, 3, 3], 60), EPS, None)
        }),
    ];
    v.extend(model_cases());
    v
}

/// Loss of the default-depth network on a 32x32 batch of two, differentiated
/// with respect to the input image and to a few parameters.
fn model_cases() -> Vec<GradCheckCase> {
    fn model() -> Result<Model> {
        let cfg = UTNetConfig {
            base_channels: 4,
            attention: AttentionConfig { heads: 2, ..AttentionConfig::default() },
            ..UTNetConfig::default()
        };
        let m = Model::build(&cfg, 7)?;
        // make the zero-initialised relative tables non-trivial
        let mut m2 = m.clone();
        let mut rng = SplitMix64::new(8);
        for (name, t, _) in m.params.iter() {
            if name.ends_with("rel_h") || name.ends_with("rel_w") {
                m2.params.set(name, Tensor::param(Tensor::randn(t.shape(), 0.3, &mut rng).to_vec(), t.shape())?)?;
            }
        }
        Ok(m2)
    }
    let labels = || -> Vec<u8> {
        let mut rng = SplitMix64::new(9);
        (0..2 * 32 * 32).map(|_| rng.below(4) as u8).collect()
    };
    let coords: Vec<usize> = (0..24).map(|i| (i * 2654435761usize) % (2 * 32 * 32)).collect();
    let mut cases = vec![GradCheckCase::new("model_input", MODEL_THRESHOLD, {
        let coords = coords.clone();
        move || {
            let m = model()?;
            let y = labels();
            grad_check_coords(
                |x| combined_loss(&m.forward(x, true)?, &y),
                &randn(&[2, 1, 32, 32], 61),
                EPS,
                Some(&coords),
            )
        }
    })];
    for name in ["attn.enc2.wq", "attn.enc1.rel_h", "attn.dec0.wk", "enc3.res.conv1", "head.w"] {
        cases.push(GradCheckCase::new(&format!("model_param:{name}"), MODEL_THRESHOLD, move || {
            let m = model()?;
            let y = labels();
            let x = randn(&[2, 1, 32, 32], 62);
            let p = m.params.get(name)?.clone();
            let n = p.numel();
            let coords: Vec<usize> = (0..n.min(12)).map(|i| i * n / n.min(12)).collect();
            grad_check_coords(
                |w| {
                    let mut mm = m.clone();
                    mm.params.set(name, w.clone())?;
                    combined_loss(&mm.forward(&x, true)?, &y)
                },
                &p,
                EPS,
                Some(&coords),
            )
        }));
    }
    cases
}

/// A deliberately wrong backward (`d/dx x^2` reported as `3x`), used to show
/// that failures are caught and named.
pub fn negative_control() -> GradCheckCase {
    GradCheckCase::new("negative_control_bad_square", OP_THRESHOLD, || {
        check(&randn(&[4], 99), |x| {
            Tensor::from_op("bad_square", x.data().iter().map(|v| v * v).collect(), x.shape().to_vec(), &[x], |ctx| {
                vec![Some(ctx.inputs[0].data().iter().zip(ctx.grad).map(|(v, g)| 3.0 * v * g).collect())]
            })
        })
    })
}

pub fn run_cases(cases: &[GradCheckCase]) -> Vec<GradCheckRow> {
    cases
        .iter()
        .map(|c| GradCheckRow {
            name: c.name.clone(),
            threshold: c.threshold,
            outcome: (c.run)().map_err(|e| e.to_string()),
        })
        .collect()
}

pub fn format_table(rows: &[GradCheckRow]) -> String {
    let mut s = format!("{:<32} {:>12} {:>10} {:>8}  {}\n", "check", "max_rel_err", "threshold", "coord", "result");
    for r in rows {
        match &r.outcome {
            Ok(rep) => {
                let _ = writeln!(
                    s,
                    "{:<32} {:>12.3e} {:>10.0e} {:>8}  {}",
                    r.name,
                    rep.max_rel_err,
                    r.threshold,
                    rep.worst_index,
                    if r.passed() { "pass" } else { "FAIL" }
                );
            }
            Err(e) => {
                let _ = writeln!(s, "{:<32} {:>12} {:>10.0e} {:>8}  FAIL ({e})", r.name, "-", r.threshold, "-");
            }
        }
    }
    s
}

/// Verification error naming every failed check and its worst coordinate.
pub fn failures(rows: &[GradCheckRow]) -> Result<()> {
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| !r.passed())
        .map(|r| match &r.outcome {
            Ok(rep) => format!(
                "{} (coordinate {}: analytic {:.6e}, numeric {:.6e}, rel err {:.3e})",
                r.name, rep.worst_index, rep.analytic, rep.numeric, rep.max_rel_err
            ),
            Err(e) => format!("{} ({e})", r.name),
        })
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Verification(format!("gradient check failed: {}", bad.join("; "))))
    }
}
