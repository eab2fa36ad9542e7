//! Command-line front end: run configuration, subcommands, the
//! gradient-check registry and ablation driver.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 verification failure, 1 anything else.

mod ablate;
mod config;
mod gradcheck;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::bench::{loglog_svg, run_bench, BenchConfig, Variant};
use crate::error::{Error, Result};
use crate::metrics::{check_compatible, evaluate};
use crate::model::{load_checkpoint, Model};
use crate::synthdata::{make_splits, DatasetManifest, Split, SplitConfig};
use crate::train::{fit, EpochRow};

pub use ablate::{ablate, ablation_csv, AblationAxis, AblationRow, ABLATION_COLUMNS};
pub use config::{DataConfig, RunConfig, SPEC_VERSION};
pub use gradcheck::{
    failures, format_table, negative_control, registry, run_cases, GradCheckCase, GradCheckRow, MODEL_THRESHOLD,
    OP_THRESHOLD,
};

#[derive(Debug, Parser)]
#[command(name = "utnet", version, about = "Hybrid CNN-Transformer segmentation on synthetic phantoms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a phantom dataset (PGM images and labels plus manifest.json)
    Synth {
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Training samples, split evenly over vendors A and B
        #[arg(long, default_value_t = 150)]
        train: usize,
        /// Validation samples, vendors A and B
        #[arg(long, default_value_t = 20)]
        val: usize,
        /// Test samples, split evenly over vendors A to D
        #[arg(long, default_value_t = 200)]
        test: usize,
        /// Image side in pixels (multiple of 16)
        #[arg(long, default_value_t = 256)]
        size: usize,
        /// Replace an existing output
        #[arg(long)]
        force: bool,
    },
    /// Train a network from a run configuration, then evaluate it on the test split
    Train {
        /// Run configuration (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Run directory; overrides the config's `out`
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace an existing output
        #[arg(long)]
        force: bool,
    },
    /// Evaluate a checkpoint per vendor and write the report CSV
    Eval {
        /// Checkpoint directory (contains model.json)
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset manifest (JSON)
        #[arg(long)]
        manifest: PathBuf,
        /// Report CSV path
        #[arg(long)]
        out: PathBuf,
        /// Split to evaluate
        #[arg(long, default_value = "test", value_parser = parse_split)]
        split: Split,
        /// Samples per forward pass
        #[arg(long, default_value_t = 8)]
        batch: usize,
        /// Replace an existing output
        #[arg(long)]
        force: bool,
    },
    /// Time standard against efficient attention over map sizes
    Bench {
        /// Comma-separated map sides, ascending
        #[arg(long, value_delimiter = ',', default_value = "16,32,64,128")]
        sizes: Vec<usize>,
        /// Per-axis size of the projected key/value grid
        #[arg(long, default_value_t = 8)]
        reduced: usize,
        /// Timed repeats per record (median reported)
        #[arg(long, default_value_t = 20)]
        repeats: usize,
        /// Channels of the attention layer
        #[arg(long, default_value_t = 32)]
        channels: usize,
        /// Attention heads
        #[arg(long, default_value_t = 4)]
        heads: usize,
        /// Largest similarity buffer (bytes) before standard attention is refused
        #[arg(long, default_value_t = 1 << 30)]
        cap_bytes: u64,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
        /// Also write a log-log SVG next to the CSV
        #[arg(long)]
        emit_plot: bool,
        /// Replace an existing output
        #[arg(long)]
        force: bool,
    },
    /// Central-difference gradient checks of every op, attention variant and the network
    Gradcheck {
        /// Also write the table to this file
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add a deliberately wrong op that must be reported
        #[arg(long, hide = true)]
        negative_control: bool,
        /// Replace an existing output
        #[arg(long)]
        force: bool,
    },
    /// Train one run per value of an ablation axis and compare validation Dice
    Ablate {
        /// Base run configuration (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Axis to vary
        #[arg(long, value_enum)]
        axis: AblationAxis,
        /// Comma-separated values; all valid values when omitted
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Replace an existing output
        #[arg(long)]
        force: bool,
    },
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        _ => Err(format!("unknown split {s:?}; valid: train, val, test")),
    }
}

/// Refuses an existing `path` unless `force`, in which case it is removed.
pub fn prepare_out(path: &Path, force: bool) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    if !force {
        return Err(Error::Config(format!("{} already exists; pass --force to replace it", path.display())));
    }
    if path.is_dir() {
        fs::remove_dir_all(path)?;
    } else {
        fs::remove_file(path)?;
    }
    Ok(())
}

fn log_epoch(tag: &str, r: &EpochRow) {
    let val = r.val_mean().map_or("-".to_string(), |v| format!("{v:.4}"));
    eprintln!("{tag}epoch {:>3}  lr {:.5}  loss {:.4}  val dice {val}", r.epoch, r.lr, r.train_loss);
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { out, train, val, test, size, force } => {
            let cfg = SplitConfig { n_train: train, n_val: val, n_test: test, size, ..SplitConfig::default() };
            let manifest = make_splits(&cfg)?;
            prepare_out(&out, force)?;
            manifest.export(&out)?;
            println!("wrote {} samples to {}", manifest.entries.len(), out.display());
        }
        Command::Train { config, out, force } => {
            let cfg = RunConfig::load(&config)?;
            let out = out
                .or_else(|| cfg.out.clone())
                .ok_or_else(|| Error::Config("no output directory: pass --out or set `out`".into()))?;
            let manifest = cfg.data.manifest()?;
            let mut model = Model::build(&cfg.model, cfg.train.seed)?;
            check_compatible(&model, manifest.size)?;
            prepare_out(&out, force)?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("config.json"), cfg.to_json())?;
            manifest.save(&out.join("manifest.json"))?;
            eprintln!("training {} parameters on {} samples", model.num_params(), manifest.split(Split::Train).count());
            fit(&mut model, &manifest, &cfg.train, Some(&out), &mut |r| log_epoch("", r))?;
            let report = evaluate(&model, &manifest.load(Split::Test)?, cfg.train.batch_size)?;
            fs::write(out.join("eval.csv"), report.to_csv())?;
            fs::write(out.join("eval.txt"), report.to_table())?;
            print!("{}", report.to_table());
        }
        Command::Eval { checkpoint, manifest, out, split, batch, force } => {
            let (model, _) = load_checkpoint(&checkpoint)?;
            let manifest = DatasetManifest::load_json(&manifest)?;
            check_compatible(&model, manifest.size)?;
            let samples = manifest.load(split)?;
            let report = evaluate(&model, &samples, batch)?;
            prepare_out(&out, force)?;
            fs::write(&out, report.to_csv())?;
            print!("{}", report.to_table());
        }
        Command::Bench { sizes, reduced, repeats, channels, heads, cap_bytes, out, emit_plot, force } => {
            let svg = out.with_extension("svg");
            prepare_out(&out, force)?;
            if emit_plot {
                prepare_out(&svg, force)?;
            }
            let cfg = BenchConfig {
                channels,
                heads,
                reduced_size: reduced,
                repeats,
                buffer_cap_bytes: cap_bytes,
                ..BenchConfig::default()
            };
            let result = run_bench(&sizes, &cfg)?;
            let csv = result.to_csv();
            fs::write(&out, &csv)?;
            if emit_plot {
                fs::write(&svg, loglog_svg(&result))?;
            }
            print!("{csv}");
            for v in [Variant::Standard, Variant::Efficient] {
                if let Some(s) = result.slope(v) {
                    eprintln!("{v}: log-log slope {s:.3}");
                }
            }
        }
        Command::Gradcheck { out, negative_control: neg, force } => {
            if let Some(p) = &out {
                prepare_out(p, force)?;
            }
            let mut cases = registry();
            if neg {
                cases.push(negative_control());
            }
            let rows = run_cases(&cases);
            let table = format_table(&rows);
            print!("{table}");
            if let Some(p) = &out {
                fs::write(p, &table)?;
            }
            failures(&rows)?;
        }
        Command::Ablate { config, axis, values, out, force } => {
            let base = RunConfig::load(&config)?;
            let values = if values.is_empty() { axis.default_values() } else { values };
            for v in &values {
                axis.apply(&base, v)?;
            }
            prepare_out(&out, force)?;
            let rows = ablate(&base, axis, &values, &out, &mut |v, r| log_epoch(&format!("[{v}] "), r))?;
            print!("{}", ablation_csv(&rows));
        }
    }
    Ok(())
}
