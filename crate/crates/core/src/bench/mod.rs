//! Timing and memory scaling of full versus projected self-attention.
//!
//! Each record times one forward pass of a single attention layer on a
//! `[1, C, H, W]` map, with the graph recorded as in training so the
//! similarity matrices are really materialized. Only attention layers are
//! timed, never whole networks.

mod plot;

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::attention::{
    buffer_stats, efficient_mhsa, reset_buffer_stats, similarity_bytes, standard_mhsa, AttentionConfig,
    AttentionWeights,
};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::{set_nan_checks, Tensor};

pub use plot::loglog_svg;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Standard,
    Efficient,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Standard => "standard",
            Variant::Efficient => "efficient",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub channels: usize,
    pub heads: usize,
    pub reduced_size: usize,
    pub repeats: usize,
    pub warmup: usize,
    /// Forwarded to the attention guard; standard attention above it is
    /// recorded as refused.
    pub buffer_cap_bytes: u64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            channels: 32,
            heads: 4,
            reduced_size: 8,
            repeats: 20,
            warmup: 1,
            buffer_cap_bytes: 1 << 30,
            seed: 0,
        }
    }
}

/// Samples shorter than this are widened by looping the forward pass.
pub const MIN_SAMPLE_SECS: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub variant: Variant,
    pub size: usize,
    pub n: usize,
    pub k: usize,
    /// Median seconds per forward pass; `None` when refused.
    pub median_secs: Option<f64>,
    pub repeats: usize,
    /// Forward passes per timed sample (above 1 when widened).
    pub inner: usize,
    /// Similarity-matrix bytes reported by the kernel instrumentation. For a
    /// refused record, the bytes the refused allocation would have needed.
    pub buffer_bytes: u64,
    pub flops: f64,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub config: BenchConfig,
    pub records: Vec<BenchRecord>,
}

/// Multiply-add counted as two operations:
/// standard `heads (2 n^2 d + n^2 + 2 n^2 d)`,
/// efficient `heads (2 n k d + n k + 2 n k d)`
/// (similarity, softmax, weighted sum of values).
pub fn flops_model(variant: Variant, n: usize, k: usize, d: usize, heads: usize) -> f64 {
    let m = match variant {
        Variant::Standard => n,
        Variant::Efficient => k,
    } as f64;
    let (n, d) = (n as f64, d as f64);
    heads as f64 * (2.0 * n * m * d + n * m + 2.0 * n * m * d)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let l: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let c = l.len() as f64;
    let mx = l.iter().map(|p| p.0).sum::<f64>() / c;
    let my = l.iter().map(|p| p.1).sum::<f64>() / c;
    let sxy: f64 = l.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = l.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Refuses to time anything when the test harness was told to run tests
/// in parallel, since concurrent work would pollute wall-clock numbers.
pub fn check_single_threaded() -> Result<()> {
    if let Ok(v) = std::env::var("RUST_TEST_THREADS") {
        if v.trim() != "1" {
            return Err(Error::Config(format!("benchmark needs a single-threaded run, but RUST_TEST_THREADS={v}")));
        }
    }
    Ok(())
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn bench_one(
    variant: Variant,
    size: usize,
    cfg: &BenchConfig,
    acfg: &AttentionConfig,
    w: &AttentionWeights,
) -> Result<BenchRecord> {
    let n = size * size;
    let (rh, rw) = acfg.reduced_grid(size, size);
    let k = match variant {
        Variant::Standard => n,
        Variant::Efficient => rh * rw,
    };
    let d = acfg.head_dim(cfg.channels)?;
    let mut rng = SplitMix64::derive(cfg.seed, &[size as u64]);
    let x = Tensor::param(
        Tensor::randn(&[1, cfg.channels, size, size], 1.0, &mut rng).to_vec(),
        &[1, cfg.channels, size, size],
    )?;
    let run = || match variant {
        Variant::Standard => standard_mhsa(&x, w, acfg),
        Variant::Efficient => efficient_mhsa(&x, w, acfg),
    };
    let mut record = BenchRecord {
        variant,
        size,
        n,
        k,
        median_secs: None,
        repeats: cfg.repeats,
        inner: 1,
        buffer_bytes: 0,
        flops: flops_model(variant, n, k, d, cfg.heads),
        note: String::new(),
    };

    reset_buffer_stats();
    let t0 = Instant::now();
    match run() {
        Ok(y) => drop(y),
        Err(Error::Config(msg)) => {
            record.note = format!("refused: {msg}");
            record.buffer_bytes = similarity_bytes(cfg.heads, n, k);
            return Ok(record);
        }
        Err(e) => return Err(e),
    }
    let first = t0.elapsed().as_secs_f64();
    record.buffer_bytes = buffer_stats().peak_bytes;
    for _ in 1..cfg.warmup {
        drop(run()?);
    }
    if first < MIN_SAMPLE_SECS {
        record.inner = (MIN_SAMPLE_SECS / first.max(1e-9)).ceil() as usize;
        record.note = format!("widened to {} passes per sample", record.inner);
    }
    let mut samples = Vec::with_capacity(cfg.repeats);
    for _ in 0..cfg.repeats {
        let t = Instant::now();
        for _ in 0..record.inner {
            drop(run()?);
        }
        samples.push(t.elapsed().as_secs_f64() / record.inner as f64);
    }
    record.median_secs = Some(median(&mut samples));
    Ok(record)
}

/// Times both variants at every size (ascending map sides `H = W`).
pub fn run_bench(sizes: &[usize], cfg: &BenchConfig) -> Result<BenchResult> {
    check_single_threaded()?;
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(Error::Config(format!("bench sizes must be positive and strictly ascending, got {sizes:?}")));
    }
    if cfg.repeats == 0 || cfg.warmup == 0 {
        return Err(Error::Config("bench needs at least one warmup pass and one repeat".into()));
    }
    let acfg = AttentionConfig {
        heads: cfg.heads,
        reduced_size: cfg.reduced_size,
        use_relpos: false,
        buffer_cap_bytes: cfg.buffer_cap_bytes,
        ..AttentionConfig::default()
    };
    acfg.validate()?;
    acfg.head_dim(cfg.channels)?;
    let w = AttentionWeights::random(cfg.channels, cfg.channels, &acfg, &mut SplitMix64::new(cfg.seed))?;
    let prev = set_nan_checks(false);
    let mut records = Vec::new();
    let out = (|| -> Result<()> {
        for &size in sizes {
            for variant in [Variant::Standard, Variant::Efficient] {
                records.push(bench_one(variant, size, cfg, &acfg, &w)?);
            }
        }
        Ok(())
    })();
    set_nan_checks(prev);
    out?;
    Ok(BenchResult { config: cfg.clone(), records })
}

impl BenchResult {
    /// Log-log slope of median time against `n` over the timed sizes.
    pub fn slope(&self, variant: Variant) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .records
            .iter()
            .filter(|r| r.variant == variant)
            .filter_map(|r| r.median_secs.map(|t| (r.n as f64, t)))
            .collect();
        loglog_slope(&pts)
    }

    pub fn record(&self, variant: Variant, size: usize) -> Option<&BenchRecord> {
        self.records.iter().find(|r| r.variant == variant && r.size == size)
    }

    /// CSV with `#` lines for the machine, the configuration and the fitted
    /// slopes, then one row per record.
    pub fn to_csv(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let cpus = std::thread::available_parallelism().map_or(0, |n| n.get());
        let _ = writeln!(
            s,
            "# machine: os={} arch={} available_parallelism={cpus} timing=wall-clock single-threaded",
            std::env::consts::OS,
            std::env::consts::ARCH
        );
        let _ = writeln!(
            s,
            "# config: channels={} heads={} reduced_size={} repeats={} warmup={} buffer_cap_bytes={} seed={}",
            c.channels, c.heads, c.reduced_size, c.repeats, c.warmup, c.buffer_cap_bytes, c.seed
        );
        for v in [Variant::Standard, Variant::Efficient] {
            match self.slope(v) {
                Some(sl) => {
                    let _ = writeln!(s, "# loglog_slope {v} = {sl:.4}");
                }
                None => {
                    let _ = writeln!(s, "# loglog_slope {v} = n/a");
                }
            }
        }
        s.push_str("variant,size,n,k,median_secs,repeats,inner,buffer_bytes,flops,note\n");
        for r in &self.records {
            let t = r.median_secs.map_or(String::new(), |t| format!("{t:e}"));
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},\"{}\"",
                r.variant,
                r.size,
                r.n,
                r.k,
                t,
                r.repeats,
                r.inner,
                r.buffer_bytes,
                r.flops,
                r.note.replace('"', "'")
            );
        }
        s
    }
}
