use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::synthdata::{stack_inputs, SegmentationSample, Vendor, NUM_CLASSES};
use crate::tensor::Tensor;

use super::overlap::{dice_score, hausdorff};

/// Nominal pixel spacing used to express Hausdorff distances in mm.
pub const SPACING_MM: f64 = 1.2;

/// Anything that maps a batch of samples to logits `[B, K, H, W]`.
pub trait Segmenter {
    fn logits(&self, samples: &[&SegmentationSample]) -> Result<Tensor>;
}

impl Segmenter for Model {
    fn logits(&self, samples: &[&SegmentationSample]) -> Result<Tensor> {
        let (x, _) = stack_inputs(samples)?;
        self.predict(&x)
    }
}

/// Per-pixel argmax over the class axis; ties go to the lower class.
pub fn argmax_classes(logits: &Tensor) -> Result<Vec<Vec<u8>>> {
    let s = logits.shape();
    if s.len() != 4 {
        return Err(Error::Data(format!("logits {s:?} are not [B, K, H, W]")));
    }
    let (b, k, hw) = (s[0], s[1], s[2] * s[3]);
    let d = logits.data();
    Ok((0..b)
        .map(|bi| {
            (0..hw)
                .map(|p| {
                    let mut best = 0;
                    for c in 1..k {
                        if d[(bi * k + c) * hw + p] > d[(bi * k + best) * hw + p] {
                            best = c;
                        }
                    }
                    best as u8
                })
                .collect()
        })
        .collect())
}

/// Dice and Hausdorff of one sample for each foreground class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub seed: u64,
    pub vendor: Vendor,
    pub dice: Vec<f64>,
    pub hausdorff_px: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class: u8,
    pub dice_mean: f64,
    pub dice_std: f64,
    /// `reference - dice_mean`, with reference the mean over vendors A and B.
    pub dice_drop: f64,
    pub hd_mean: f64,
    pub hd_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VendorStats {
    pub vendor: Vendor,
    pub count: usize,
    pub classes: Vec<ClassStats>,
    /// Mean of the per-class Dice means.
    pub mean_dice: f64,
    pub mean_drop: f64,
}

/// Vendor-wise summary. Drops are measured against the average of vendors A
/// and B, the training vendors; they are NaN when either is absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub vendors: Vec<VendorStats>,
    pub samples: Vec<SampleScore>,
}

/// Population mean and standard deviation.
fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

/// Scores every sample with `model`, in ascending seed order, in batches of
/// `batch` samples.
pub fn score_samples(model: &dyn Segmenter, samples: &[SegmentationSample], batch: usize) -> Result<Vec<SampleScore>> {
    let mut order: Vec<&SegmentationSample> = samples.iter().collect();
    order.sort_by_key(|s| (s.seed, s.vendor));
    let mut out = Vec::with_capacity(order.len());
    for chunk in order.chunks(batch.max(1)) {
        let logits = model.logits(chunk)?;
        if logits.shape()[0] != chunk.len() || logits.shape()[1] != NUM_CLASSES {
            return Err(Error::Config(format!(
                "segmenter returned logits {:?} for {} samples of {NUM_CLASSES} classes",
                logits.shape(),
                chunk.len()
            )));
        }
        for (s, pred) in chunk.iter().zip(argmax_classes(&logits)?) {
            let mut dice = Vec::with_capacity(NUM_CLASSES - 1);
            let mut hd = Vec::with_capacity(NUM_CLASSES - 1);
            for c in 1..NUM_CLASSES as u8 {
                dice.push(dice_score(&pred, &s.label, c)?);
                hd.push(hausdorff(&pred, &s.label, s.size, s.size, c)?);
            }
            out.push(SampleScore { seed: s.seed, vendor: s.vendor, dice, hausdorff_px: hd });
        }
    }
    Ok(out)
}

impl EvalReport {
    pub fn from_scores(samples: Vec<SampleScore>) -> EvalReport {
        let mut vendors: Vec<VendorStats> = Vendor::ALL
            .iter()
            .filter_map(|&v| {
                let rows: Vec<&SampleScore> = samples.iter().filter(|s| s.vendor == v).collect();
                if rows.is_empty() {
                    return None;
                }
                let classes: Vec<ClassStats> = (0..NUM_CLASSES - 1)
                    .map(|c| {
                        let d: Vec<f64> = rows.iter().map(|r| r.dice[c]).collect();
                        let h: Vec<f64> = rows.iter().map(|r| r.hausdorff_px[c]).collect();
                        let (dice_mean, dice_std) = mean_std(&d);
                        let (hd_mean, hd_std) = mean_std(&h);
                        ClassStats { class: c as u8 + 1, dice_mean, dice_std, dice_drop: f64::NAN, hd_mean, hd_std }
                    })
                    .collect();
                let mean_dice = classes.iter().map(|c| c.dice_mean).sum::<f64>() / classes.len() as f64;
                Some(VendorStats { vendor: v, count: rows.len(), classes, mean_dice, mean_drop: f64::NAN })
            })
            .collect();
        let find = |vs: &[VendorStats], v: Vendor| vs.iter().position(|s| s.vendor == v);
        if let (Some(a), Some(b)) = (find(&vendors, Vendor::A), find(&vendors, Vendor::B)) {
            let ref_mean = (vendors[a].mean_dice + vendors[b].mean_dice) / 2.0;
            let ref_class: Vec<f64> = (0..NUM_CLASSES - 1)
                .map(|c| (vendors[a].classes[c].dice_mean + vendors[b].classes[c].dice_mean) / 2.0)
                .collect();
            for v in &mut vendors {
                v.mean_drop = ref_mean - v.mean_dice;
                for (c, r) in v.classes.iter_mut().zip(&ref_class) {
                    c.dice_drop = r - c.dice_mean;
                }
            }
        }
        EvalReport { vendors, samples }
    }

    pub fn vendor(&self, v: Vendor) -> Option<&VendorStats> {
        self.vendors.iter().find(|s| s.vendor == v)
    }

    /// Mean foreground Dice over every scored sample.
    pub fn overall_dice(&self) -> f64 {
        let n = self.samples.len() as f64 * (NUM_CLASSES - 1) as f64;
        self.samples.iter().flat_map(|s| &s.dice).sum::<f64>() / n
    }

    /// Long-format CSV, one row per (vendor, class) plus a `mean` row per
    /// vendor. Columns: `vendor,class,count,dice_mean,dice_std,dice_drop,
    /// hd_px_mean,hd_px_std,hd_mm_mean`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("vendor,class,count,dice_mean,dice_std,dice_drop,hd_px_mean,hd_px_std,hd_mm_mean\n");
        for v in &self.vendors {
            for c in &v.classes {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{}",
                    v.vendor,
                    c.class,
                    v.count,
                    c.dice_mean,
                    c.dice_std,
                    c.dice_drop,
                    c.hd_mean,
                    c.hd_std,
                    c.hd_mean * SPACING_MM
                );
            }
            let hd = v.classes.iter().map(|c| c.hd_mean).sum::<f64>() / v.classes.len() as f64;
            let _ = writeln!(
                s,
                "{},mean,{},{},,{},{},,{}",
                v.vendor,
                v.count,
                v.mean_dice,
                v.mean_drop,
                hd,
                hd * SPACING_MM
            );
        }
        s
    }

    /// Human-readable table: one column per vendor, Dice with its drop.
    pub fn to_table(&self) -> String {
        let mut s = format!("{:<8}", "class");
        for v in &self.vendors {
            let _ = write!(s, "{:>20}", format!("vendor {}", v.vendor));
        }
        s.push('\n');
        let cell = |d: f64, drop: f64| {
            if drop.is_nan() {
                format!("{:.3}", d)
            } else {
                format!("{:.3} ({:+.3})", d, -drop)
            }
        };
        for c in 0..NUM_CLASSES - 1 {
            let _ = write!(s, "{:<8}", ["LV", "MYO", "RV"][c]);
            for v in &self.vendors {
                let _ = write!(s, "{:>20}", cell(v.classes[c].dice_mean, v.classes[c].dice_drop));
            }
            s.push('\n');
        }
        let _ = write!(s, "{:<8}", "mean");
        for v in &self.vendors {
            let _ = write!(s, "{:>20}", cell(v.mean_dice, v.mean_drop));
        }
        s.push('\n');
        let _ = write!(s, "{:<8}", "HD mm");
        for v in &self.vendors {
            let hd = v.classes.iter().map(|c| c.hd_mean).sum::<f64>() / v.classes.len() as f64;
            let _ = write!(s, "{:>20}", format!("{:.2}", hd * SPACING_MM));
        }
        s.push('\n');
        s
    }
}

/// Scores `samples` and aggregates them per vendor.
pub fn evaluate(model: &dyn Segmenter, samples: &[SegmentationSample], batch: usize) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::Data("nothing to evaluate".into()));
    }
    Ok(EvalReport::from_scores(score_samples(model, samples, batch)?))
}

/// Checks that `model` can segment images of `size` pixels into the
/// phantom classes.
pub fn check_compatible(model: &Model, size: usize) -> Result<()> {
    let cfg = &model.config;
    if cfg.num_classes != NUM_CLASSES || cfg.in_channels != 1 {
        return Err(Error::Config(format!(
            "model maps {} channel(s) to {} classes; the dataset needs 1 -> {NUM_CLASSES}",
            cfg.in_channels, cfg.num_classes
        )));
    }
    if !size.is_multiple_of(cfg.size_multiple()) {
        return Err(Error::Config(format!(
            "dataset size {size} is not a multiple of {} required by a {}-level model",
            cfg.size_multiple(),
            cfg.levels
        )));
    }
    Ok(())
}
