use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

use super::vendor::Vendor;

pub const BACKGROUND: u8 = 0;
/// Bright blood-pool disk (left-ventricle analogue).
pub const LV: u8 = 1;
/// Dark ring around the disk (myocardium analogue).
pub const MYO: u8 = 2;
/// Bright blob beside the ring (right-ventricle analogue).
pub const RV: u8 = 3;
pub const NUM_CLASSES: usize = 4;

/// Resampling attempts before generation gives up on a seed.
const MAX_BUMPS: u32 = 64;

/// One image/label pair. `image` is `[1, size, size]` with values in [0, 1];
/// `label` is row-major `size * size` with values in `0..NUM_CLASSES`.
#[derive(Clone, Debug)]
pub struct SegmentationSample {
    pub image: Tensor,
    pub label: Vec<u8>,
    pub size: usize,
    pub vendor: Vendor,
    pub seed: u64,
    /// Number of geometry redraws needed to satisfy the topology check.
    pub bump: u32,
}

impl SegmentationSample {
    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut c = [0; NUM_CLASSES];
        self.label.iter().for_each(|&l| c[l as usize] += 1);
        c
    }
}

#[derive(Clone, Copy, Debug)]
struct Ellipse {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    cos: f64,
    sin: f64,
}

impl Ellipse {
    fn new(cx: f64, cy: f64, rx: f64, ry: f64, theta: f64) -> Self {
        Ellipse { cx, cy, rx, ry, cos: theta.cos(), sin: theta.sin() }
    }

    /// Squared normalized radius; < 1 inside.
    fn rho(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = dx * self.cos + dy * self.sin;
        let v = -dx * self.sin + dy * self.cos;
        (u / self.rx).powi(2) + (v / self.ry).powi(2)
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        self.rho(x, y) < 1.0
    }

    fn scaled(&self, f: f64) -> Self {
        Ellipse { rx: self.rx * f, ry: self.ry * f, ..*self }
    }
}

/// Anatomy and tissue parameters in normalized coordinates ([-1, 1]^2).
struct Geometry {
    body: Ellipse,
    lv: Ellipse,
    myo_outer: Ellipse,
    rv: Ellipse,
    distractor: Option<Ellipse>,
    lv_int: f64,
    myo_int: f64,
    rv_int: f64,
    body_int: f64,
    distractor_int: f64,
    texture: Vec<(f64, f64, f64, f64)>,
    bias: (f64, f64, f64),
}

impl Geometry {
    fn draw(rng: &mut SplitMix64) -> Geometry {
        let body = Ellipse::new(
            rng.range(-0.05, 0.05),
            rng.range(-0.05, 0.05),
            rng.range(0.78, 0.92),
            rng.range(0.62, 0.78),
            rng.range(-0.3, 0.3),
        );
        let r = rng.range(0.17, 0.23);
        let aspect = rng.range(0.85, 1.15);
        let theta = rng.range(0.0, std::f64::consts::PI);
        let lv = Ellipse::new(rng.range(-0.12, 0.12), rng.range(-0.12, 0.12), r * aspect, r / aspect, theta);
        let myo_outer = lv.scaled(rng.range(1.45, 1.65));
        let phi = rng.range(0.6, 2.5) + std::f64::consts::PI;
        let outer_r = myo_outer.rx.max(myo_outer.ry);
        let rv_len = rng.range(0.26, 0.34);
        let rv_wid = rng.range(0.13, 0.18);
        let dist = outer_r + rv_wid * 0.35;
        let rv = Ellipse::new(lv.cx + dist * phi.cos(), lv.cy + dist * phi.sin(), rv_wid, rv_len, phi);
        // bright organ-like blob on the opposite side of the heart
        let distractor = (rng.uniform() < 0.5).then(|| {
            let a = phi + std::f64::consts::PI + rng.range(-0.5, 0.5);
            let d = outer_r + rng.range(0.3, 0.4);
            Ellipse::new(
                lv.cx + d * a.cos(),
                lv.cy + d * a.sin(),
                rng.range(0.12, 0.18),
                rng.range(0.2, 0.3),
                rng.range(0.0, std::f64::consts::PI),
            )
        });
        let texture = (0..4)
            .map(|_| {
                (
                    rng.range(1.0, 4.0),
                    rng.range(0.0, std::f64::consts::TAU),
                    rng.range(0.0, std::f64::consts::TAU),
                    rng.range(0.01, 0.025),
                )
            })
            .collect();
        Geometry {
            body,
            lv,
            myo_outer,
            rv,
            distractor,
            lv_int: rng.range(0.8, 0.9),
            myo_int: rng.range(0.18, 0.26),
            rv_int: rng.range(0.72, 0.82),
            body_int: rng.range(0.38, 0.46),
            distractor_int: rng.range(0.62, 0.72),
            texture,
            bias: (rng.range(-0.08, 0.08), rng.range(-0.08, 0.08), rng.range(-0.08, 0.04)),
        }
    }

    fn label_at(&self, x: f64, y: f64) -> u8 {
        if self.lv.contains(x, y) {
            LV
        } else if self.myo_outer.contains(x, y) {
            MYO
        } else if self.rv.contains(x, y) {
            RV
        } else {
            BACKGROUND
        }
    }

    fn intensity_at(&self, x: f64, y: f64) -> f64 {
        let base = match self.label_at(x, y) {
            LV => self.lv_int,
            MYO => self.myo_int,
            RV => self.rv_int,
            _ => {
                if self.distractor.is_some_and(|d| d.contains(x, y)) {
                    self.distractor_int
                } else if self.body.contains(x, y) {
                    let tex: f64 = self
                        .texture
                        .iter()
                        .map(|&(f, a, p, amp)| amp * (f * (x * a.cos() + y * a.sin()) * std::f64::consts::PI + p).sin())
                        .sum();
                    self.body_int + tex
                } else {
                    0.05
                }
            }
        };
        let (bx, by, br) = self.bias;
        base * (1.0 + bx * x + by * y + br * (x * x + y * y))
    }
}

/// True when no 8-connected path of non-ring pixels joins a disk pixel to
/// the image border, i.e. the ring encloses the disk.
pub fn ring_encloses_disk(label: &[u8], size: usize) -> bool {
    let mut seen = vec![false; label.len()];
    let mut queue = VecDeque::new();
    for i in 0..size {
        for p in [i, (size - 1) * size + i, i * size, i * size + size - 1] {
            if label[p] != MYO && !seen[p] {
                seen[p] = true;
                queue.push_back(p);
            }
        }
    }
    while let Some(p) = queue.pop_front() {
        if label[p] == LV {
            return false;
        }
        let (y, x) = ((p / size) as isize, (p % size) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (ny, nx) = (y + dy, x + dx);
                if ny < 0 || nx < 0 || ny >= size as isize || nx >= size as isize {
                    continue;
                }
                let q = ny as usize * size + nx as usize;
                if !seen[q] && label[q] != MYO {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
    }
    true
}

/// Deterministic phantom for `(seed, vendor, size)`. Geometry depends only
/// on the seed, so the same seed gives the same anatomy for every vendor;
/// the vendor selects the appearance shift and noise stream.
pub fn generate(seed: u64, vendor: Vendor, size: usize) -> Result<SegmentationSample> {
    if size == 0 || !size.is_multiple_of(16) {
        return Err(Error::Config(format!("phantom size must be a positive multiple of 16, got {size}")));
    }
    for bump in 0..MAX_BUMPS {
        let geo = Geometry::draw(&mut SplitMix64::derive(seed, &[u64::from(bump), 1]));
        let coord = |i: usize, off: f64| (2.0 * (i as f64 + off) / size as f64) - 1.0;
        let mut label = vec![0u8; size * size];
        let mut img = vec![0.0; size * size];
        for py in 0..size {
            for px in 0..size {
                label[py * size + px] = geo.label_at(coord(px, 0.5), coord(py, 0.5));
                // 2x2 supersampling gives partial-volume edges
                img[py * size + px] = [0.25, 0.75]
                    .iter()
                    .flat_map(|&oy| [0.25, 0.75].map(|ox| geo.intensity_at(coord(px, ox), coord(py, oy))))
                    .sum::<f64>()
                    / 4.0;
            }
        }
        if !ring_encloses_disk(&label, size) {
            continue;
        }
        let mut rng = SplitMix64::derive(seed, &[u64::from(bump), 2, vendor.index() as u64]);
        vendor.shift().apply(&mut img, size, &mut rng);
        return Ok(SegmentationSample { image: Tensor::new(img, &[1, size, size])?, label, size, vendor, seed, bump });
    }
    Err(Error::Data(format!("seed {seed}: no valid phantom after {MAX_BUMPS} redraws")))
}
