use std::fmt::Write as _;

use super::{BenchResult, Variant};

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;

/// Log-log plot of median time against `n`, one polyline per variant.
pub fn loglog_svg(result: &BenchResult) -> String {
    let pts: Vec<(Variant, f64, f64)> = result
        .records
        .iter()
        .filter_map(|r| r.median_secs.map(|t| (r.variant, (r.n as f64).log10(), t.log10())))
        .collect();
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    if pts.is_empty() {
        s.push_str("<text x=\"20\" y=\"40\">no timed records</text>\n</svg>\n");
        return s;
    }
    let bounds = |f: fn(&(Variant, f64, f64)) -> f64| {
        let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min).floor();
        let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max).ceil();
        (lo, if hi > lo { hi } else { lo + 1.0 })
    };
    let (x0, x1) = bounds(|p| p.1);
    let (y0, y1) = bounds(|p| p.2);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let _ = writeln!(
        s,
        "<g stroke=\"black\"><line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\"/><line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\"/></g>",
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    for e in x0 as i32..=x1 as i32 {
        let x = px(e as f64);
        let _ = writeln!(
            s,
            "<text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">1e{e}</text>",
            H - MARGIN + 18.0
        );
    }
    for e in y0 as i32..=y1 as i32 {
        let y = py(e as f64);
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{y:.1}\" font-size=\"12\" text-anchor=\"end\">1e{e}</text>",
            MARGIN - 6.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">n = H x W</text>",
        W / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">seconds per forward</text>",
        H / 2.0,
        H / 2.0
    );
    for (i, (v, colour)) in [(Variant::Standard, "#c0392b"), (Variant::Efficient, "#2471a3")].iter().enumerate() {
        let line: Vec<String> =
            pts.iter().filter(|p| p.0 == *v).map(|p| format!("{:.1},{:.1}", px(p.1), py(p.2))).collect();
        if line.is_empty() {
            continue;
        }
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\" points=\"{}\"/>",
            line.join(" ")
        );
        for p in &line {
            let (x, y) = p.split_once(',').unwrap();
            let _ = writeln!(s, "<circle cx=\"{x}\" cy=\"{y}\" r=\"3\" fill=\"{colour}\"/>");
        }
        let slope = result.slope(*v).map_or("n/a".to_string(), |s| format!("{s:.2}"));
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" fill=\"{colour}\">{v} (slope {slope})</text>",
            MARGIN + 10.0,
            MARGIN + 16.0 * i as f64
        );
    }
    s.push_str("</svg>\n");
    s
}
