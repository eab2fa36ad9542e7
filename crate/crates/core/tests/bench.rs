use proptest::prelude::*;
use utnet::bench::{flops_model, loglog_slope, run_bench, BenchConfig, Variant};
use utnet::Error;

fn quick() -> BenchConfig {
    BenchConfig { repeats: 3, ..Default::default() }
}

#[test]
fn buffer_bytes_at_32() {
    let r = run_bench(&[16, 32], &quick()).unwrap();
    let s = r.record(Variant::Standard, 32).unwrap();
    let e = r.record(Variant::Efficient, 32).unwrap();
    assert_eq!(s.buffer_bytes, 33_554_432);
    assert_eq!(e.buffer_bytes, 2_097_152);
    assert_eq!(s.buffer_bytes / e.buffer_bytes, 16);
    assert_eq!((s.n, s.k, e.k), (1024, 1024, 64));
    assert!(s.median_secs.unwrap() > 0.0 && e.median_secs.unwrap() > 0.0);
}

#[test]
fn standard_refused_above_cap() {
    let cfg = BenchConfig { buffer_cap_bytes: 40 << 20, ..quick() };
    let r = run_bench(&[16, 32, 64], &cfg).unwrap();
    let s = r.record(Variant::Standard, 64).unwrap();
    assert!(s.median_secs.is_none());
    assert!(s.note.starts_with("refused"), "{}", s.note);
    assert_eq!(s.buffer_bytes, 4 * 4096 * 4096 * 8);
    assert_eq!(s.buffer_bytes / r.record(Variant::Efficient, 64).unwrap().buffer_bytes, 64);
    assert!(r.record(Variant::Efficient, 64).unwrap().median_secs.is_some());
    // the refused size is left out of the fit
    assert!(r.slope(Variant::Standard).is_some());
    let csv = r.to_csv();
    assert!(csv.contains("# loglog_slope"));
    assert!(csv.lines().any(|l| l.starts_with("standard,64,") && l.contains("refused")));
}

#[test]
fn sizes_must_ascend() {
    assert!(matches!(run_bench(&[32, 16], &quick()), Err(Error::Config(_))));
    assert!(matches!(run_bench(&[], &quick()), Err(Error::Config(_))));
}

#[test]
fn flops_ratio_at_128() {
    let n = 128 * 128;
    let s = flops_model(Variant::Standard, n, 64, 8, 4);
    let e = flops_model(Variant::Efficient, n, 64, 8, 4);
    assert_eq!(s / e, 256.0);
}

#[test]
fn slope_of_power_law() {
    let pts: Vec<(f64, f64)> = (1..6).map(|i| (i as f64, 3.0 * (i as f64).powf(1.7))).collect();
    assert!((loglog_slope(&pts).unwrap() - 1.7).abs() < 1e-12);
    assert!(loglog_slope(&pts[..1]).is_none());
}

proptest! {
    #[test]
    fn flops_linear_in_keys_and_heads(n in 1usize..5000, k in 1usize..500, d in 1usize..64, h in 1usize..16) {
        let e = flops_model(Variant::Efficient, n, k, d, h);
        prop_assert_eq!(e, (h * (4 * n * k * d + n * k)) as f64);
        prop_assert_eq!(flops_model(Variant::Efficient, n, 2 * k, d, h), 2.0 * e);
        prop_assert_eq!(flops_model(Variant::Standard, n, k, d, h), flops_model(Variant::Efficient, n, n, d, h));
    }
}
