use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::pgm::{write_pgm16, write_pgm8};
use super::phantom::{generate, SegmentationSample};
use super::vendor::Vendor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub seed: u64,
    pub vendor: Vendor,
    pub split: Split,
    /// Geometry redraws the generator needed for this seed.
    pub bump: u32,
}

/// Listing of every sample in a dataset. Samples are regenerated from
/// `(seed, vendor, size)` on demand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub size: usize,
    /// Nominal pixel spacing in mm; metadata only.
    pub spacing_mm: f64,
    pub entries: Vec<ManifestEntry>,
}

/// Split sizes, vendors and the first seed of each split's seed range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub train_vendors: Vec<Vendor>,
    pub test_vendors: Vec<Vendor>,
    pub train_seed_start: u64,
    pub val_seed_start: u64,
    pub test_seed_start: u64,
    pub size: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            n_train: 150,
            n_val: 20,
            n_test: 200,
            train_vendors: vec![Vendor::A, Vendor::B],
            test_vendors: Vendor::ALL.to_vec(),
            train_seed_start: 0,
            val_seed_start: 100_000,
            test_seed_start: 200_000,
            size: 64,
        }
    }
}

fn ranges_overlap(a: (u64, usize), b: (u64, usize)) -> bool {
    let (a0, a1) = (a.0, a.0 + a.1 as u64);
    let (b0, b1) = (b.0, b.0 + b.1 as u64);
    a.1 > 0 && b.1 > 0 && a0 < b1 && b0 < a1
}

/// Builds the manifest. Training and validation samples cycle through
/// `train_vendors`, test samples through `test_vendors`, so `150` over
/// `{A, B}` gives 75 each and `200` over `{A, B, C, D}` gives 50 each.
pub fn make_splits(cfg: &SplitConfig) -> Result<DatasetManifest> {
    let ranges = [
        ("train", (cfg.train_seed_start, cfg.n_train)),
        ("val", (cfg.val_seed_start, cfg.n_val)),
        ("test", (cfg.test_seed_start, cfg.n_test)),
    ];
    for i in 0..3 {
        for j in i + 1..3 {
            if ranges_overlap(ranges[i].1, ranges[j].1) {
                return Err(Error::Config(format!(
                    "seed ranges of the {} and {} splits overlap",
                    ranges[i].0, ranges[j].0
                )));
            }
        }
    }
    if (cfg.n_train + cfg.n_val > 0 && cfg.train_vendors.is_empty()) || (cfg.n_test > 0 && cfg.test_vendors.is_empty())
    {
        return Err(Error::Config("every non-empty split needs at least one vendor".into()));
    }
    let mut entries = Vec::with_capacity(cfg.n_train + cfg.n_val + cfg.n_test);
    for (split, start, n, vendors) in [
        (Split::Train, cfg.train_seed_start, cfg.n_train, &cfg.train_vendors),
        (Split::Val, cfg.val_seed_start, cfg.n_val, &cfg.train_vendors),
        (Split::Test, cfg.test_seed_start, cfg.n_test, &cfg.test_vendors),
    ] {
        for i in 0..n {
            let seed = start + i as u64;
            let vendor = vendors[i % vendors.len()];
            let bump = generate(seed, vendor, cfg.size)?.bump;
            entries.push(ManifestEntry { seed, vendor, split, bump });
        }
    }
    Ok(DatasetManifest { size: cfg.size, spacing_mm: 1.2, entries })
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Regenerates the samples of one split, checking recorded redraw counts.
    pub fn load(&self, split: Split) -> Result<Vec<SegmentationSample>> {
        self.split(split)
            .map(|e| {
                let s = generate(e.seed, e.vendor, self.size)?;
                if s.bump != e.bump {
                    return Err(Error::Data(format!(
                        "seed {} regenerated with {} redraws, manifest records {}",
                        e.seed, s.bump, e.bump
                    )));
                }
                Ok(s)
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Data(format!("cannot read manifest {}: {e}", path.display())))?;
        let m: DatasetManifest = serde_json::from_str(&text)?;
        if m.size == 0 || !m.size.is_multiple_of(16) {
            return Err(Error::Config(format!("manifest size {} is not a positive multiple of 16", m.size)));
        }
        Ok(m)
    }

    /// Writes `manifest.json` plus `images/<split>_<seed>_<vendor>.pgm`
    /// (16-bit) and `labels/<split>_<seed>_<vendor>.pgm` (8-bit) under `dir`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("images"))?;
        fs::create_dir_all(dir.join("labels"))?;
        for split in [Split::Train, Split::Val, Split::Test] {
            for s in self.load(split)? {
                let stem = format!("{split}_{}_{}.pgm", s.seed, s.vendor);
                write_pgm16(&dir.join("images").join(&stem), s.size, s.size, s.image.data())?;
                write_pgm8(&dir.join("labels").join(&stem), s.size, s.size, &s.label)?;
            }
        }
        self.save(&dir.join("manifest.json"))
    }
}
