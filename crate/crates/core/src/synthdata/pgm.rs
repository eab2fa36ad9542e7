//! Binary PGM (P5) images: 16-bit for intensities, 8-bit for labels.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

fn header(w: usize, h: usize, maxval: u32) -> Vec<u8> {
    format!("P5\n{w} {h}\n{maxval}\n").into_bytes()
}

/// Writes intensities in [0, 1] quantized to 16 bits (big-endian samples).
pub fn write_pgm16(path: &Path, w: usize, h: usize, data: &[f64]) -> Result<()> {
    let mut out = header(w, h, 65535);
    for &v in data {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_pgm8(path: &Path, w: usize, h: usize, data: &[u8]) -> Result<()> {
    let mut out = header(w, h, 255);
    out.extend_from_slice(data);
    fs::write(path, out)?;
    Ok(())
}

/// Raw samples of a P5 file: `(width, height, maxval, samples)`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, u32, Vec<u16>)> {
    let bytes = fs::read(path)?;
    let bad = |why: &str| Error::Data(format!("{}: {why}", path.display()));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" {
        return Err(bad("not a binary PGM"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])? as u32);
    let body = &bytes[pos.min(bytes.len())..];
    let samples: Vec<u16> = if maxval > 255 {
        if body.len() != 2 * w * h {
            return Err(bad("payload size mismatch"));
        }
        body.chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        if body.len() != w * h {
            return Err(bad("payload size mismatch"));
        }
        body.iter().map(|&b| b as u16).collect()
    };
    Ok((w, h, maxval, samples))
}
