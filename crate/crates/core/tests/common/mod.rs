//! Independent oracles shared by the metric tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::HashSet;

use utnet::rng::SplitMix64;

pub fn random_mask(rng: &mut SplitMix64, n: usize, density: f64) -> Vec<u8> {
    (0..n).map(|_| u8::from(rng.uniform() < density)).collect()
}

pub fn set_dice(a: &[u8], b: &[u8]) -> f64 {
    let pa: HashSet<usize> = (0..a.len()).filter(|&i| a[i] == 1).collect();
    let pb: HashSet<usize> = (0..b.len()).filter(|&i| b[i] == 1).collect();
    if pa.is_empty() && pb.is_empty() {
        return 1.0;
    }
    2.0 * pa.intersection(&pb).count() as f64 / (pa.len() + pb.len()) as f64
}

/// Boundary by explicit erosion: a class pixel whose four neighbours are
/// all in the class (inside the image) survives erosion.
fn brute_boundary(m: &[u8], h: usize, w: usize) -> Vec<(f64, f64)> {
    let at = |y: i64, x: i64| y >= 0 && x >= 0 && y < h as i64 && x < w as i64 && m[(y * w as i64 + x) as usize] == 1;
    let mut out = Vec::new();
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let eroded = at(y, x) && at(y - 1, x) && at(y + 1, x) && at(y, x - 1) && at(y, x + 1);
            if at(y, x) && !eroded {
                out.push((y as f64, x as f64));
            }
        }
    }
    out
}

pub fn brute_hausdorff(a: &[u8], b: &[u8], h: usize, w: usize) -> f64 {
    let (ba, bb) = (brute_boundary(a, h, w), brute_boundary(b, h, w));
    match (ba.is_empty(), bb.is_empty()) {
        (true, true) => return 0.0,
        (false, false) => {}
        _ => return ((h * h + w * w) as f64).sqrt(),
    }
    let directed = |p: &[(f64, f64)], q: &[(f64, f64)]| {
        p.iter()
            .map(|a| q.iter().map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(&ba, &bb).max(directed(&bb, &ba))
}
