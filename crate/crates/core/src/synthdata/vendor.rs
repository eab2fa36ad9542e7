use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Acquisition source of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Vendor {
    A,
    B,
    C,
    D,
}

impl Vendor {
    pub const ALL: [Vendor; 4] = [Vendor::A, Vendor::B, Vendor::C, Vendor::D];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Fixed appearance shift of this vendor.
    pub fn shift(self) -> VendorShift {
        match self {
            Vendor::A => VendorShift { contrast_gain: 1.0, noise_sigma: 0.02, blur_sigma: 0.0, gamma: 1.0 },
            Vendor::B => VendorShift { contrast_gain: 0.85, noise_sigma: 0.03, blur_sigma: 0.5, gamma: 1.15 },
            // motion-blur analogue
            Vendor::C => VendorShift { contrast_gain: 0.9, noise_sigma: 0.02, blur_sigma: 1.3, gamma: 1.0 },
            // noisy, low-contrast analogue
            Vendor::D => VendorShift { contrast_gain: 0.55, noise_sigma: 0.05, blur_sigma: 0.0, gamma: 0.85 },
        }
    }
}

impl std::fmt::Display for Vendor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for Vendor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Vendor::A),
            "B" | "b" => Ok(Vendor::B),
            "C" | "c" => Ok(Vendor::C),
            "D" | "d" => Ok(Vendor::D),
            _ => Err(Error::Config(format!("unknown vendor {s:?}; valid: A, B, C, D"))),
        }
    }
}

/// Appearance transform applied in the order blur, contrast, gamma, noise,
/// clamp to [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VendorShift {
    /// Scales deviations from 0.5.
    pub contrast_gain: f64,
    pub noise_sigma: f64,
    /// Gaussian blur std in pixels at 64x64, scaled linearly with image size.
    pub blur_sigma: f64,
    pub gamma: f64,
}

impl VendorShift {
    pub fn apply(&self, img: &mut [f64], size: usize, rng: &mut SplitMix64) {
        let sigma = self.blur_sigma * size as f64 / 64.0;
        if sigma > 0.0 {
            gaussian_blur(img, size, sigma);
        }
        if self.contrast_gain != 1.0 || self.gamma != 1.0 {
            for v in img.iter_mut() {
                let c = (0.5 + self.contrast_gain * (*v - 0.5)).clamp(0.0, 1.0);
                *v = c.powf(self.gamma);
            }
        }
        if self.noise_sigma > 0.0 {
            for v in img.iter_mut() {
                *v += self.noise_sigma * rng.normal();
            }
        }
        img.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    }
}

/// Separable Gaussian blur of a square image, edge pixels replicated.
pub fn gaussian_blur(img: &mut [f64], size: usize, sigma: f64) {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);
    let clampi = |i: isize| i.clamp(0, size as isize - 1) as usize;
    let mut tmp = vec![0.0; img.len()];
    for y in 0..size {
        for x in 0..size {
            tmp[y * size + x] = kernel
                .iter()
                .enumerate()
                .map(|(t, k)| k * img[y * size + clampi(x as isize + t as isize - radius)])
                .sum();
        }
    }
    for y in 0..size {
        for x in 0..size {
            img[y * size + x] = kernel
                .iter()
                .enumerate()
                .map(|(t, k)| k * tmp[clampi(y as isize + t as isize - radius) * size + x])
                .sum();
        }
    }
}

/// Michelson contrast `(hi - lo) / (hi + lo)` using the 1st and 99th
/// intensity percentiles, so isolated noise extremes do not dominate.
pub fn michelson_contrast(img: &[f64]) -> f64 {
    let mut s = img.to_vec();
    s.sort_by(f64::total_cmp);
    let at = |q: f64| s[((s.len() - 1) as f64 * q).round() as usize];
    let (lo, hi) = (at(0.01), at(0.99));
    if hi + lo == 0.0 {
        0.0
    } else {
        (hi - lo) / (hi + lo)
    }
}
