use proptest::prelude::*;
use utnet::attention::{
    buffer_stats, decoder_cross_mhsa, efficient_mhsa, efficient_mhsa_relpos, reset_buffer_stats, similarity_bytes,
    standard_mhsa, AttentionConfig, AttentionWeights, Projection, RelativePositionTable,
};
use utnet::rng::SplitMix64;
use utnet::tensor::{no_grad, Tensor};
use utnet::Error;

fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn setup(seed: u64, cfg: &AttentionConfig, c: usize, h: usize) -> (Tensor, AttentionWeights) {
    let mut rng = SplitMix64::new(seed);
    let x = Tensor::randn(&[2, c, h, h], 1.0, &mut rng);
    let w = AttentionWeights::random(c, c, cfg, &mut rng).unwrap();
    (x, w)
}

#[test]
fn efficient_with_full_grid_matches_standard() {
    for projection in [Projection::Bilinear, Projection::Maxpool] {
        let cfg = AttentionConfig { reduced_size: 8, projection, use_relpos: false, ..Default::default() };
        for seed in 0..10 {
            let (x, w) = setup(seed, &cfg, 8, 8);
            let s = standard_mhsa(&x, &w, &cfg).unwrap();
            let e = efficient_mhsa(&x, &w, &cfg).unwrap();
            let d = max_abs_diff(&s, &e);
            assert!(d <= 1e-10, "{projection} seed {seed}: {d}");
        }
    }
}

#[test]
fn zero_relative_tables_do_not_change_output() {
    let cfg = AttentionConfig { reduced_size: 4, ..Default::default() };
    for seed in 0..10 {
        let (x, w) = setup(seed, &cfg, 8, 8);
        assert!(w.rel.is_some());
        let a = efficient_mhsa(&x, &w, &cfg).unwrap();
        let b = efficient_mhsa_relpos(&x, &w, &cfg).unwrap();
        assert!(max_abs_diff(&a, &b) <= 1e-12);
    }
}

#[test]
fn nonzero_relative_tables_change_output() {
    let cfg = AttentionConfig { reduced_size: 4, ..Default::default() };
    let (x, mut w) = setup(3, &cfg, 8, 8);
    let mut rng = SplitMix64::new(9);
    w.rel = Some(RelativePositionTable::random(4, 4, 2, 0.5, &mut rng).unwrap());
    let a = efficient_mhsa(&x, &w, &cfg).unwrap();
    let b = efficient_mhsa_relpos(&x, &w, &cfg).unwrap();
    assert!(max_abs_diff(&a, &b) > 1e-3);
}

#[test]
fn buffer_accounting_follows_grid_sizes() {
    let cfg = AttentionConfig { reduced_size: 4, use_relpos: false, ..Default::default() };
    let (x, w) = setup(1, &cfg, 8, 16);
    reset_buffer_stats();
    standard_mhsa(&x, &w, &cfg).unwrap();
    // batch 2 x 4 heads, 256 queries by 256 keys
    assert_eq!(buffer_stats().last_bytes, similarity_bytes(8, 256, 256));
    efficient_mhsa(&x, &w, &cfg).unwrap();
    assert_eq!(buffer_stats().last_bytes, similarity_bytes(8, 256, 16));
    assert_eq!(buffer_stats().peak_bytes, 8 * 256 * 256 * 8);
    assert_eq!(buffer_stats().calls, 2);
}

#[test]
fn cap_refuses_standard_but_not_efficient() {
    let cfg = AttentionConfig { reduced_size: 4, use_relpos: false, buffer_cap_bytes: 1 << 20, ..Default::default() };
    let (x, w) = setup(2, &cfg, 8, 16);
    // 8 groups x 256 x 256 x 8 bytes = 4 MiB
    assert!(matches!(standard_mhsa(&x, &w, &cfg), Err(Error::Config(_))));
    assert!(efficient_mhsa(&x, &w, &cfg).is_ok());
}

#[test]
fn cross_attention_keeps_query_shape() {
    let cfg = AttentionConfig { reduced_size: 4, ..Default::default() };
    let mut rng = SplitMix64::new(4);
    let hi = Tensor::randn(&[1, 8, 16, 16], 1.0, &mut rng);
    let lo = Tensor::randn(&[1, 16, 8, 8], 1.0, &mut rng);
    let w = AttentionWeights::random(8, 16, &cfg, &mut rng).unwrap();
    let y = decoder_cross_mhsa(&hi, &lo, &w, &cfg).unwrap();
    assert_eq!(y.shape(), hi.shape());
    assert!(matches!(decoder_cross_mhsa(&lo, &hi, &w, &cfg), Err(Error::Config(_))));
}

#[test]
fn no_grad_matches_recorded_forward() {
    let cfg = AttentionConfig { reduced_size: 4, ..Default::default() };
    let (x, w) = setup(5, &cfg, 8, 8);
    let a = efficient_mhsa_relpos(&x, &w, &cfg).unwrap();
    let b = no_grad(|| efficient_mhsa_relpos(&x, &w, &cfg)).unwrap();
    assert_eq!(a.data(), b.data());
}

#[test]
fn heads_must_divide_channels() {
    let cfg = AttentionConfig { heads: 3, ..Default::default() };
    let mut rng = SplitMix64::new(0);
    assert!(AttentionWeights::random(8, 8, &cfg, &mut rng).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Attention output is a convex combination of values, so before the
    // output projection it is bounded by the value range. With identity
    // projections that bound carries to the output.
    #[test]
    fn output_bounded_by_inputs(seed in 0u64..1000, size in 2usize..6) {
        let cfg = AttentionConfig { heads: 2, reduced_size: size, use_relpos: false, ..Default::default() };
        let mut rng = SplitMix64::new(seed);
        let x = Tensor::randn(&[1, 4, 6, 6], 1.0, &mut rng);
        let mut w = AttentionWeights::random(4, 4, &cfg, &mut rng).unwrap();
        let eye = Tensor::from_fn(&[4, 4, 1, 1], |i| if i % 5 == 0 { 1.0 } else { 0.0 });
        w.wv = eye.clone();
        w.wo = eye;
        let y = efficient_mhsa(&x, &w, &cfg).unwrap();
        for c in 0..4 {
            let plane = &x.data()[c * 36..(c + 1) * 36];
            let lo = plane.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = plane.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in &y.data()[c * 36..(c + 1) * 36] {
                prop_assert!(*v >= lo - 1e-9 && *v <= hi + 1e-9);
            }
        }
    }
}
