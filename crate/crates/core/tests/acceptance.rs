//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
//! fails. `ACCEPTANCE_ONLY=1,4` restricts the run to the listed criteria.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use utnet::attention::{
    efficient_mhsa, efficient_mhsa_relpos, standard_mhsa, AttentionConfig, AttentionWeights, Projection,
};
use utnet::bench::{run_bench, BenchConfig, Variant};
use utnet::cli::{failures, registry, run_cases, RunConfig};
use utnet::metrics::{dice_score, evaluate, hausdorff, EvalReport};
use utnet::model::{save_checkpoint, Model, UTNetConfig};
use utnet::rng::SplitMix64;
use utnet::synthdata::{Split, Vendor, NUM_CLASSES};
use utnet::tensor::Tensor;
use utnet::train::fit;
use utnet::Result;

use common::{brute_hausdorff, random_mask, set_dice};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn within(limit: Duration, t0: Instant) -> (bool, String) {
    let e = t0.elapsed();
    (e < limit, format!("{:.1}s of {}s", e.as_secs_f64(), limit.as_secs()))
}

fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn attention_pair(seed: u64, cfg: &AttentionConfig) -> Result<(Tensor, AttentionWeights)> {
    let mut rng = SplitMix64::new(seed);
    let x = Tensor::randn(&[1, 8, 8, 8], 1.0, &mut rng);
    let w = AttentionWeights::random(8, 8, cfg, &mut rng)?;
    Ok((x, w))
}

fn oracle_equivalence() -> Result<Verdict> {
    let t0 = Instant::now();
    // an 8x8 reduced grid on an 8x8 map keeps every key: k = n, identity projection
    let mut worst: f64 = 0.0;
    for projection in [Projection::Bilinear, Projection::Maxpool] {
        let cfg = AttentionConfig { heads: 4, reduced_size: 8, projection, use_relpos: false, ..Default::default() };
        for seed in 0..10 {
            let (x, w) = attention_pair(seed, &cfg)?;
            worst = worst.max(max_abs_diff(&standard_mhsa(&x, &w, &cfg)?, &efficient_mhsa(&x, &w, &cfg)?));
        }
    }
    let (fast, t) = within(Duration::from_secs(10), t0);
    verdict(worst <= 1e-10 && fast, format!("max abs diff {worst:.2e} (<= 1e-10) over 10 seeds, both projections; {t}"))
}

fn relpos_collapse() -> Result<Verdict> {
    let t0 = Instant::now();
    let cfg = AttentionConfig { heads: 4, reduced_size: 4, use_relpos: true, ..Default::default() };
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let (x, w) = attention_pair(seed, &cfg)?;
        let tables = w.rel.as_ref().expect("relative tables present");
        assert!(tables.r_h.data().iter().chain(tables.r_w.data()).all(|&v| v == 0.0));
        worst = worst.max(max_abs_diff(&efficient_mhsa(&x, &w, &cfg)?, &efficient_mhsa_relpos(&x, &w, &cfg)?));
    }
    let (fast, t) = within(Duration::from_secs(5), t0);
    verdict(worst <= 1e-12 && fast, format!("max abs diff {worst:.2e} (<= 1e-12); {t}"))
}

fn gradient_suite() -> Result<Verdict> {
    let t0 = Instant::now();
    let rows = run_cases(&registry());
    let worst = rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|o| (o.max_rel_err / r.threshold, r.name.as_str())))
        .fold((0.0, ""), |a, b| if b.0 > a.0 { b } else { a });
    let (fast, t) = within(Duration::from_secs(300), t0);
    let detail = match failures(&rows) {
        Ok(()) => format!("{} cases pass; worst {} at {:.1e} of its threshold; {t}", rows.len(), worst.1, worst.0),
        Err(e) => format!("{e}; {t}"),
    };
    verdict(failures(&rows).is_ok() && fast, detail)
}

fn complexity() -> Result<Verdict> {
    let t0 = Instant::now();
    let cfg = BenchConfig::default();
    let sizes = [16, 32, 64, 128];
    let r = run_bench(&sizes, &cfg)?;
    let std_slope = r.slope(Variant::Standard).unwrap_or(f64::NAN);
    let eff_slope = r.slope(Variant::Efficient).unwrap_or(f64::NAN);
    let mut ratios_exact = true;
    for &s in &sizes {
        let (a, b) = (r.record(Variant::Standard, s).unwrap(), r.record(Variant::Efficient, s).unwrap());
        ratios_exact &= b.buffer_bytes > 0 && a.buffer_bytes == b.buffer_bytes * (a.n / b.k) as u64 && a.n % b.k == 0;
    }
    let s128 = r.record(Variant::Standard, 128).unwrap();
    let e128 = r.record(Variant::Efficient, 128).unwrap();
    let ratio128 = s128.buffer_bytes as f64 / e128.buffer_bytes as f64;
    let timed: Vec<usize> = r
        .records
        .iter()
        .filter(|x| x.variant == Variant::Standard && x.median_secs.is_some())
        .map(|x| x.size)
        .collect();
    let (fast, t) = within(Duration::from_secs(300), t0);
    let pass = (1.7..=2.3).contains(&std_slope)
        && (0.8..=1.4).contains(&eff_slope)
        && ratios_exact
        && ratio128 == 256.0
        && fast;
    verdict(
        pass,
        format!(
            "slopes standard {std_slope:.3} (timed at H={timed:?}) efficient {eff_slope:.3}; bytes ratio n/k exact: {ratios_exact}, {ratio128} at H=128; {t}"
        ),
    )
}

/// Results of one desk training run.
struct DeskRun {
    overall: f64,
    cd_drop: f64,
    drops_exact: bool,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Recomputes every per-vendor class mean from the per-sample scores and
/// checks each drop cell is `mean(A, B) - value`.
fn drops_exact(r: &EvalReport) -> bool {
    let per_vendor =
        |v: Vendor, c: usize| mean(&r.samples.iter().filter(|s| s.vendor == v).map(|s| s.dice[c]).collect::<Vec<_>>());
    let csv = r.to_csv();
    let csv_ok = csv.lines().next().is_some_and(|h| h.split(',').any(|c| c == "dice_drop"));
    let mut ok = csv_ok && r.vendors.len() == 4;
    for v in &r.vendors {
        for (c, cs) in v.classes.iter().enumerate() {
            let ref_ab = (per_vendor(Vendor::A, c) + per_vendor(Vendor::B, c)) / 2.0;
            ok &= (cs.dice_mean - per_vendor(v.vendor, c)).abs() < 1e-12;
            ok &= (cs.dice_drop - (ref_ab - cs.dice_mean)).abs() < 1e-12;
        }
        let (a, b) = (r.vendor(Vendor::A).unwrap(), r.vendor(Vendor::B).unwrap());
        ok &= v.mean_drop == (a.mean_dice + b.mean_dice) / 2.0 - v.mean_dice;
    }
    ok
}

fn desk_run(base: &RunConfig, baseline: bool, seed: u64) -> Result<DeskRun> {
    let mut cfg = base.clone();
    cfg.model.baseline_mode = baseline;
    cfg.train.seed = seed;
    let manifest = cfg.data.manifest()?;
    let mut model = Model::build(&cfg.model, seed)?;
    let t0 = Instant::now();
    fit(&mut model, &manifest, &cfg.train, None, &mut |_| {})?;
    let report = evaluate(&model, &manifest.load(Split::Test)?, cfg.train.batch_size)?;
    let cd = mean(&[Vendor::C, Vendor::D].map(|v| report.vendor(v).map_or(f64::NAN, |s| s.mean_drop)));
    let run = DeskRun { overall: report.overall_dice(), cd_drop: cd, drops_exact: drops_exact(&report) };
    eprintln!(
        "  {} seed {seed}: test dice {:.4}, C/D drop {:+.4} ({:.0}s)",
        if baseline { "resunet" } else { "utnet  " },
        run.overall,
        run.cd_drop,
        t0.elapsed().as_secs_f64()
    );
    Ok(run)
}

fn desk_config() -> Result<RunConfig> {
    let cfg = RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.json"))?;
    assert_eq!(cfg.model.attention_levels, "1234");
    assert_eq!(cfg.model.attention.reduced_size, 8);
    assert!(cfg.model.attention.use_relpos);
    assert_eq!((cfg.data.splits.n_train, cfg.data.splits.n_test, cfg.train.epochs), (150, 200, 30));
    Ok(cfg)
}

/// Criteria 5 and 6 share the same six training runs.
fn desk_runs() -> Result<(Vec<DeskRun>, Vec<DeskRun>, Duration)> {
    let t0 = Instant::now();
    let cfg = desk_config()?;
    let mut ut = Vec::new();
    let mut base = Vec::new();
    for seed in 0..3 {
        ut.push(desk_run(&cfg, false, seed)?);
        base.push(desk_run(&cfg, true, seed)?);
    }
    Ok((ut, base, t0.elapsed()))
}

fn training_ordering(ut: &[DeskRun], base: &[DeskRun], took: Duration) -> Result<Verdict> {
    let u = mean(&ut.iter().map(|r| r.overall).collect::<Vec<_>>());
    let b = mean(&base.iter().map(|r| r.overall).collect::<Vec<_>>());
    let fast = took < Duration::from_secs(3600);
    verdict(
        u >= 0.85 && u >= b - 0.01 && fast,
        format!(
            "utnet {u:.4} (>= 0.85), resunet {b:.4} (utnet >= resunet - 0.01); 6 runs in {:.0}s of 3600s",
            took.as_secs_f64()
        ),
    )
}

fn robustness(ut: &[DeskRun], base: &[DeskRun]) -> Result<Verdict> {
    let u = mean(&ut.iter().map(|r| r.cd_drop).collect::<Vec<_>>());
    let b = mean(&base.iter().map(|r| r.cd_drop).collect::<Vec<_>>());
    let exact = ut.iter().chain(base).all(|r| r.drops_exact);
    verdict(
        exact && u <= b + 0.02,
        format!("drop columns exact: {exact}; C/D mean drop utnet {u:+.4}, resunet {b:+.4} (utnet <= resunet + 0.02)"),
    )
}

fn dir_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).expect("readable run dir") {
            let p = e.expect("dir entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).expect("readable file"));
            }
        }
    }
    out
}

fn determinism() -> Result<Verdict> {
    let mut cfg = desk_config()?;
    cfg.model = UTNetConfig {
        base_channels: 4,
        levels: 3,
        attention_levels: "12".into(),
        attention: AttentionConfig { heads: 2, reduced_size: 4, ..Default::default() },
        ..Default::default()
    };
    cfg.data.splits.n_train = 8;
    cfg.data.splits.n_val = 4;
    cfg.data.splits.n_test = 8;
    cfg.data.splits.size = 32;
    cfg.train.epochs = 2;
    cfg.train.batch_size = 4;
    cfg.train.checkpoint_every = 1;
    let tmp = tempfile::tempdir()?;
    let mut snapshots = Vec::new();
    for run in 0..2 {
        let dir = tmp.path().join(format!("run{run}"));
        let manifest = cfg.data.manifest()?;
        let mut model = Model::build(&cfg.model, cfg.train.seed)?;
        fit(&mut model, &manifest, &cfg.train, Some(&dir), &mut |_| {})?;
        let report = evaluate(&model, &manifest.load(Split::Test)?, 4)?;
        fs::write(dir.join("eval.csv"), report.to_csv())?;
        save_checkpoint(&model, &dir.join("again"), cfg.train.epochs, 0.0)?;
        snapshots.push(dir_bytes(&dir));
    }
    let files = snapshots[0].len();
    let same = snapshots[0] == snapshots[1];
    let checkpoints = snapshots[0].keys().filter(|k| k.ends_with("model.json")).count();
    verdict(
        same && checkpoints >= 3,
        format!("{files} files ({checkpoints} checkpoints) identical across two runs: {same}"),
    )
}

fn metric_oracles() -> Result<Verdict> {
    let mut rng = SplitMix64::new(8);
    let mut dice_ok = 0;
    let mut hd_ok = 0;
    for i in 0..50 {
        let a = random_mask(&mut rng, 144, 0.1 + 0.015 * i as f64);
        let b = random_mask(&mut rng, 144, 0.1 + 0.015 * i as f64);
        dice_ok += usize::from((dice_score(&a, &b, 1)? - set_dice(&a, &b)).abs() < 1e-12);
        let (h, w) = (5 + rng.below(12) as usize, 5 + rng.below(12) as usize);
        let density = [0.05, 0.3, 0.6, 0.9][i % 4];
        let c = random_mask(&mut rng, h * w, density);
        let d = random_mask(&mut rng, h * w, density);
        hd_ok += usize::from((hausdorff(&c, &d, h, w, 1)? - brute_hausdorff(&c, &d, h, w)).abs() < 1e-12);
    }
    let half = dice_score(&[1, 1, 1, 1, 0, 0, 0, 0], &[0, 0, 1, 1, 1, 1, 0, 0], 1)?;
    let mut p = vec![0u8; 64];
    let mut q = vec![0u8; 64];
    p[0] = 1;
    q[3 * 8 + 4] = 1;
    let five = hausdorff(&p, &q, 8, 8, 1)?;
    verdict(
        dice_ok == 50 && hd_ok == 50 && half == 0.5 && five == 5.0,
        format!("dice {dice_ok}/50, hausdorff {hd_ok}/50 match oracles; analytic dice {half}, hausdorff {five}"),
    )
}

fn main() {
    let only: Option<Vec<u32>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |id: u32| only.as_ref().is_none_or(|o| o.contains(&id));
    let mut failed = 0;
    let mut report = |id: u32, name: &str, v: Result<Verdict>| {
        let (pass, detail) = match v {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!("[{}] {id}. {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    };
    assert_eq!(NUM_CLASSES, 4);

    if wanted(1) {
        report(1, "oracle equivalence", oracle_equivalence());
    }
    if wanted(2) {
        report(2, "relative-position collapse", relpos_collapse());
    }
    if wanted(3) {
        report(3, "gradient suite", gradient_suite());
    }
    if wanted(4) {
        report(4, "complexity slopes and buffer ratio", complexity());
    }
    if wanted(5) || wanted(6) {
        match desk_runs() {
            Ok((ut, base, took)) => {
                if wanted(5) {
                    report(5, "desk training ordering", training_ordering(&ut, &base, took));
                }
                if wanted(6) {
                    report(6, "vendor-shift robustness", robustness(&ut, &base));
                }
            }
            Err(e) => {
                for (id, name) in [(5, "desk training ordering"), (6, "vendor-shift robustness")] {
                    if wanted(id) {
                        report(id, name, Err(utnet::Error::Verification(format!("training failed: {e}"))));
                    }
                }
            }
        }
    }
    if wanted(7) {
        report(7, "determinism", determinism());
    }
    if wanted(8) {
        report(8, "metric oracles", metric_oracles());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
