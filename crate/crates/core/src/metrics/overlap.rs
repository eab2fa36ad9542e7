use crate::error::{Error, Result};

fn check_pair(op: &str, pred: &[u8], gt: &[u8]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::Data(format!("{op}: mask sizes differ ({} vs {})", pred.len(), gt.len())));
    }
    Ok(())
}

/// `2|P ∩ G| / (|P| + |G|)` for the pixels labelled `class`. Both empty
/// gives 1, exactly one empty gives 0.
pub fn dice_score(pred: &[u8], gt: &[u8], class: u8) -> Result<f64> {
    check_pair("dice_score", pred, gt)?;
    let (mut p, mut g, mut both) = (0usize, 0usize, 0usize);
    for (&a, &b) in pred.iter().zip(gt) {
        let (ia, ib) = (a == class, b == class);
        p += ia as usize;
        g += ib as usize;
        both += (ia && ib) as usize;
    }
    if p + g == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (p + g) as f64)
}

/// Pixels of `class` with at least one 4-neighbour outside the class or
/// outside the image (the mask minus its 4-connected erosion).
pub fn boundary(mask: &[u8], h: usize, w: usize, class: u8) -> Vec<(usize, usize)> {
    let inside = |y: isize, x: isize| {
        y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w && mask[y as usize * w + x as usize] == class
    };
    let mut out = Vec::new();
    for y in 0..h as isize {
        for x in 0..w as isize {
            if inside(y, x) && !(inside(y - 1, x) && inside(y + 1, x) && inside(y, x - 1) && inside(y, x + 1)) {
                out.push((y as usize, x as usize));
            }
        }
    }
    out
}

/// Exact squared Euclidean distance transform of a binary seed set, by
/// separable lower envelopes of parabolas (Felzenszwalb & Huttenlocher).
fn squared_edt(seeds: &[bool], h: usize, w: usize) -> Vec<f64> {
    const INF: f64 = 1e20;
    let mut f: Vec<f64> = seeds.iter().map(|&s| if s { 0.0 } else { INF }).collect();
    let mut line = vec![0.0; h.max(w)];
    let mut out = vec![0.0; h.max(w)];
    let mut v = vec![0usize; h.max(w)];
    let mut z = vec![0.0; h.max(w) + 1];
    for x in 0..w {
        for y in 0..h {
            line[y] = f[y * w + x];
        }
        edt_1d(&line[..h], &mut out[..h], &mut v, &mut z);
        for y in 0..h {
            f[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        line[..w].copy_from_slice(&f[y * w..(y + 1) * w]);
        edt_1d(&line[..w], &mut out[..w], &mut v, &mut z);
        f[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }
    f
}

fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let qf = q as f64;
        let mut s;
        loop {
            let p = v[k] as f64;
            s = ((f[q] + qf * qf) - (f[v[k]] + p * p)) / (2.0 * qf - 2.0 * p);
            // z[0] is -inf, so this stops at k = 0
            if s > z[k] {
                break;
            }
            k -= 1;
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, dq) in d.iter_mut().enumerate().take(n) {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        *dq = (qf - p) * (qf - p) + f[v[k]];
    }
}

fn directed(from: &[(usize, usize)], to_dt: &[f64], w: usize) -> f64 {
    from.iter().map(|&(y, x)| to_dt[y * w + x]).fold(0.0, f64::max).sqrt()
}

/// Symmetric Hausdorff distance in pixels between the boundaries of
/// `class` in two `h x w` masks. Both empty gives 0; exactly one empty
/// gives the image diagonal.
pub fn hausdorff(pred: &[u8], gt: &[u8], h: usize, w: usize, class: u8) -> Result<f64> {
    check_pair("hausdorff", pred, gt)?;
    if pred.len() != h * w {
        return Err(Error::Data(format!("hausdorff: {} pixels for a {h}x{w} mask", pred.len())));
    }
    let bp = boundary(pred, h, w, class);
    let bg = boundary(gt, h, w, class);
    match (bp.is_empty(), bg.is_empty()) {
        (true, true) => return Ok(0.0),
        (true, false) | (false, true) => return Ok(((h * h + w * w) as f64).sqrt()),
        _ => {}
    }
    let seeds = |b: &[(usize, usize)]| {
        let mut s = vec![false; h * w];
        b.iter().for_each(|&(y, x)| s[y * w + x] = true);
        s
    };
    let dt_p = squared_edt(&seeds(&bp), h, w);
    let dt_g = squared_edt(&seeds(&bg), h, w);
    Ok(directed(&bp, &dt_g, w).max(directed(&bg, &dt_p, w)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edt_single_seed() {
        let mut s = vec![false; 5 * 7];
        s[2 * 7 + 3] = true;
        let d = squared_edt(&s, 5, 7);
        for y in 0..5 {
            for x in 0..7 {
                let want = (y as f64 - 2.0).powi(2) + (x as f64 - 3.0).powi(2);
                assert_eq!(d[y * 7 + x], want);
            }
        }
    }

    #[test]
    fn solid_square_boundary_is_ring() {
        let mut m = vec![0u8; 36];
        for y in 1..5 {
            for x in 1..5 {
                m[y * 6 + x] = 1;
            }
        }
        assert_eq!(boundary(&m, 6, 6, 1).len(), 12);
    }
}
