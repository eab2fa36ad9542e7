use utnet::attention::{buffer_stats, reset_buffer_stats, standard_mhsa, AttentionConfig};
use utnet::model::{
    load_checkpoint, save_checkpoint, transformer_decoder_block, transformer_encoder_block, Model, ParamKind,
    UTNetConfig,
};
use utnet::rng::SplitMix64;
use utnet::tensor::{grad_check, no_grad, ops, Tensor};
use utnet::Error;

fn small() -> UTNetConfig {
    UTNetConfig {
        base_channels: 4,
        levels: 3,
        attention_levels: "12".into(),
        attention: AttentionConfig { heads: 2, reduced_size: 4, ..Default::default() },
        ..Default::default()
    }
}

fn zero_like(t: &Tensor) -> Tensor {
    Tensor::zeros(t.shape())
}

#[test]
fn default_census_in_band() {
    let m = Model::build(&UTNetConfig::default(), 0).unwrap();
    let n = m.num_params();
    assert!((8_000_000..=11_000_000).contains(&n), "{n}");
    assert!(m.census().transformer() > 0);
}

#[test]
fn baseline_has_no_transformer_params() {
    let base = Model::build(&UTNetConfig::baseline(), 0).unwrap();
    assert_eq!(base.census().transformer(), 0);
    assert_eq!(base.census().count(ParamKind::Attention), 0);
    let empty = Model::build(&UTNetConfig { attention_levels: String::new(), ..Default::default() }, 0).unwrap();
    let a: Vec<_> = base.params.iter().map(|(n, t, _)| (n.to_string(), t.to_vec())).collect();
    let b: Vec<_> = empty.params.iter().map(|(n, t, _)| (n.to_string(), t.to_vec())).collect();
    assert_eq!(a, b);
}

#[test]
fn same_seed_same_parameters() {
    let a = Model::build(&small(), 11).unwrap();
    let b = Model::build(&small(), 11).unwrap();
    let c = Model::build(&small(), 12).unwrap();
    let flat = |m: &Model| m.params.iter().flat_map(|(_, t, _)| t.to_vec()).collect::<Vec<f64>>();
    assert_eq!(flat(&a), flat(&b));
    assert_ne!(flat(&a), flat(&c));
    // relative tables start at zero
    for (name, t, kind) in a.params.iter() {
        if kind == ParamKind::RelPos {
            assert!(t.data().iter().all(|&v| v == 0.0), "{name}");
        }
    }
}

#[test]
fn bad_attention_digit_is_config_error() {
    for levels in ["1x", "0", "5", "11"] {
        let cfg = UTNetConfig { attention_levels: levels.into(), ..Default::default() };
        assert!(matches!(Model::build(&cfg, 0), Err(Error::Config(_))), "{levels}");
    }
}

#[test]
fn forward_shapes_and_probabilities() {
    let m = Model::build(
        &UTNetConfig {
            base_channels: 4,
            attention: AttentionConfig { heads: 2, ..Default::default() },
            ..Default::default()
        },
        1,
    )
    .unwrap();
    let x = Tensor::randn(&[1, 1, 64, 64], 1.0, &mut SplitMix64::new(2));
    let y = m.predict(&x).unwrap();
    assert_eq!(y.shape(), &[1, 4, 64, 64]);
    assert_eq!(y.data(), m.predict(&x).unwrap().data());
    let p = ops::softmax(&y, 1).unwrap();
    for i in 0..64 * 64 {
        let s: f64 = (0..4).map(|c| p.data()[c * 4096 + i]).sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
    let bad = Tensor::zeros(&[1, 1, 40, 40]);
    match m.predict(&bad) {
        Err(Error::Data(msg)) => assert!(msg.contains("16"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn zero_transformer_weights_give_identity_encoder() {
    let m = Model::build(&small(), 3).unwrap();
    let mut w = m.encoder_weights(1).unwrap();
    w.attn.wo = zero_like(&w.attn.wo);
    w.ffn.w2 = zero_like(&w.ffn.w2);
    w.ffn.b2 = zero_like(&w.ffn.b2);
    let x = Tensor::randn(&[1, 8, 16, 16], 1.0, &mut SplitMix64::new(4));
    let y = transformer_encoder_block(&x, &w, &m.config.attention).unwrap();
    assert_eq!(y.data(), x.data());
}

#[test]
fn zero_attention_decoder_is_upsample_path() {
    let m = Model::build(&small(), 3).unwrap();
    let mut w = m.decoder_weights(0).unwrap();
    w.attn.wo = zero_like(&w.attn.wo);
    w.ffn.w2 = zero_like(&w.ffn.w2);
    w.ffn.b2 = zero_like(&w.ffn.b2);
    let mut rng = SplitMix64::new(5);
    let hi = Tensor::randn(&[1, 4, 16, 16], 1.0, &mut rng);
    let lo = Tensor::randn(&[1, 8, 8, 8], 1.0, &mut rng);
    let y = transformer_decoder_block(&hi, &lo, &w, &m.config.attention).unwrap();
    assert_eq!(y.shape(), hi.shape());
    let want = ops::bilinear_resize(&ops::conv2d(&lo, &w.conv_ch, None, 1, 0).unwrap(), 16, 16).unwrap();
    for (a, b) in y.data().iter().zip(want.data()) {
        assert!((a - b).abs() < 1e-12);
    }
    let wrong = Tensor::randn(&[1, 8, 4, 4], 1.0, &mut rng);
    assert!(matches!(transformer_decoder_block(&hi, &wrong, &w, &m.config.attention), Err(Error::Config(_))));
}

#[test]
fn encoder_block_gradient() {
    let cfg = UTNetConfig {
        base_channels: 8,
        attention: AttentionConfig { heads: 2, reduced_size: 4, ..Default::default() },
        ..Default::default()
    };
    let m = Model::build(&cfg, 6).unwrap();
    let w = m.encoder_weights(1).unwrap();
    let x = Tensor::randn(&[1, 16, 8, 8], 1.0, &mut SplitMix64::new(7));
    let r = Tensor::randn(&[1, 16, 8, 8], 1.0, &mut SplitMix64::new(8));
    let err =
        grad_check(|t| ops::sum_all(&ops::mul(&transformer_encoder_block(t, &w, &cfg.attention)?, &r)?), &x, 1e-5)
            .unwrap();
    assert!(err < 1e-5, "{err}");
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let m = Model::build(&small(), 9).unwrap();
    // move the running statistics away from their initial values
    let x = Tensor::randn(&[2, 1, 16, 16], 1.0, &mut SplitMix64::new(10));
    m.forward(&x, true).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(&m, dir.path(), 4, 0.0123).unwrap();
    let (back, meta) = load_checkpoint(dir.path()).unwrap();
    assert_eq!((meta.epoch, meta.lr, meta.seed), (4, 0.0123, 9));
    assert_eq!(meta.census, m.census());
    for ((na, a, _), (nb, b, _)) in m.params.iter().zip(back.params.iter()) {
        assert_eq!(na, nb);
        assert_eq!(
            a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
    assert_eq!(m.predict(&x).unwrap().data(), back.predict(&x).unwrap().data());
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let m = Model::build(&small(), 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(&m, dir.path(), 0, 0.1).unwrap();
    std::fs::write(dir.path().join("model.json"), "{ not json").unwrap();
    assert!(load_checkpoint(dir.path()).is_err());
}

/// At 128x128 the first downsampling level holds a 64x64 map: standard
/// attention there needs 4 x 4096^2 x 8 = 512 MiB of similarities, the
/// reduced variant 4 x 4096 x 64 x 8 = 8 MiB. The matching decoder block
/// queries from the full 128x128 skip, 4 x 16384 x 64 x 8 = 32 MiB.
#[test]
fn level_one_memory_budget_at_desk_size() {
    let budget = 64 << 20;
    let cfg = UTNetConfig {
        base_channels: 8,
        attention_levels: "1".into(),
        attention: AttentionConfig { buffer_cap_bytes: budget, ..Default::default() },
        ..Default::default()
    };
    let m = Model::build(&cfg, 0).unwrap();
    let x = Tensor::randn(&[1, 1, 128, 128], 1.0, &mut SplitMix64::new(1));
    reset_buffer_stats();
    m.predict(&x).unwrap();
    let peak = buffer_stats().peak_bytes;
    assert_eq!(peak, 4 * 16384 * 64 * 8);
    assert!(peak < budget);
    let w = m.encoder_weights(1).unwrap();
    let feat = Tensor::zeros(&[1, 16, 64, 64]);
    let r = no_grad(|| standard_mhsa(&feat, &w.attn, &cfg.attention));
    assert!(matches!(r, Err(Error::Config(_))));
}
