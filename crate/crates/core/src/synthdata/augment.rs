use crate::error::Result;
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

use super::phantom::SegmentationSample;

/// One draw of the augmentation transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentParams {
    pub rotation_deg: f64,
    pub scale: f64,
    /// Shift as a fraction of the image size.
    pub translate: (f64, f64),
    pub noise_sigma: f64,
    pub gamma: f64,
}

impl AugmentParams {
    pub fn identity() -> Self {
        AugmentParams { rotation_deg: 0.0, scale: 1.0, translate: (0.0, 0.0), noise_sigma: 0.0, gamma: 1.0 }
    }

    /// Rotation within ±30°, scale 0.8–1.2, translation within ±10%, noise
    /// std up to 0.05, gamma 0.7–1.5.
    pub fn draw(rng: &mut SplitMix64) -> Self {
        AugmentParams {
            rotation_deg: rng.range(-30.0, 30.0),
            scale: rng.range(0.8, 1.2),
            translate: (rng.range(-0.1, 0.1), rng.range(-0.1, 0.1)),
            noise_sigma: rng.range(0.0, 0.05),
            gamma: rng.range(0.7, 1.5),
        }
    }
}

/// Random augmentation keyed by `seed`.
pub fn augment(sample: &SegmentationSample, seed: u64) -> Result<SegmentationSample> {
    let mut rng = SplitMix64::derive(seed, &[sample.seed, 3]);
    let p = AugmentParams::draw(&mut rng);
    augment_with(sample, &p, &mut rng)
}

/// Applies a similarity transform about the image centre (output pixel
/// `p` samples the input at `c + R^-1 (p - c - t) / s`), then gamma, noise
/// and clamping. The image is resampled bilinearly, the label by nearest
/// neighbour; samples falling outside the input read 0 / background, and
/// the output keeps the input size.
pub fn augment_with(
    sample: &SegmentationSample,
    p: &AugmentParams,
    rng: &mut SplitMix64,
) -> Result<SegmentationSample> {
    let n = sample.size;
    let src = sample.image.data();
    let c = (n as f64 - 1.0) / 2.0;
    let (sin, cos) = p.rotation_deg.to_radians().sin_cos();
    let (tx, ty) = (p.translate.0 * n as f64, p.translate.1 * n as f64);
    let mut img = vec![0.0; n * n];
    let mut label = vec![0u8; n * n];
    let px_at = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= n as isize || y >= n as isize {
            0.0
        } else {
            src[y as usize * n + x as usize]
        }
    };
    for oy in 0..n {
        for ox in 0..n {
            let (dx, dy) = ((ox as f64 - c - tx) / p.scale, (oy as f64 - c - ty) / p.scale);
            // inverse rotation
            let sx = c + cos * dx + sin * dy;
            let sy = c - sin * dx + cos * dy;
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            let mut v = 0.0;
            for (yy, wy) in [(y0, 1.0 - fy), (y0 + 1, fy)] {
                for (xx, wx) in [(x0, 1.0 - fx), (x0 + 1, fx)] {
                    if wx * wy != 0.0 {
                        v += wx * wy * px_at(xx, yy);
                    }
                }
            }
            img[oy * n + ox] = v;
            let (nx, ny) = (sx.round(), sy.round());
            if nx >= 0.0 && ny >= 0.0 && nx < n as f64 && ny < n as f64 {
                label[oy * n + ox] = sample.label[ny as usize * n + nx as usize];
            }
        }
    }
    for v in img.iter_mut() {
        let mut x = v.clamp(0.0, 1.0);
        if p.gamma != 1.0 {
            x = x.powf(p.gamma);
        }
        if p.noise_sigma > 0.0 {
            x += p.noise_sigma * rng.normal();
        }
        *v = x.clamp(0.0, 1.0);
    }
    Ok(SegmentationSample { image: Tensor::new(img, &[1, n, n])?, label, ..sample.clone() })
}
