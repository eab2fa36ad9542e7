use proptest::prelude::*;
use utnet::error::Error;
use utnet::rng::SplitMix64;
use utnet::synthdata::*;

#[test]
fn generation_is_deterministic() {
    let a = generate(17, Vendor::B, 64).unwrap();
    let b = generate(17, Vendor::B, 64).unwrap();
    assert_eq!(a.image.data(), b.image.data());
    assert_eq!(a.label, b.label);
}

#[test]
fn geometry_is_shared_across_vendors() {
    let a = generate(5, Vendor::A, 64).unwrap();
    let d = generate(5, Vendor::D, 64).unwrap();
    assert_eq!(a.label, d.label);
    assert_ne!(a.image.data(), d.image.data());
}

#[test]
fn size_must_be_multiple_of_16() {
    assert!(matches!(generate(0, Vendor::A, 40), Err(Error::Config(_))));
}

#[test]
fn all_classes_present_for_nearly_all_seeds() {
    let missing = (0..1000u64).filter(|&s| generate(s, Vendor::A, 64).unwrap().class_counts().contains(&0)).count();
    assert!(missing <= 10, "{missing} of 1000 seeds lack a class");
}

#[test]
fn every_sample_has_enclosing_ring() {
    for s in 0..200u64 {
        let x = generate(s, Vendor::C, 64).unwrap();
        assert!(ring_encloses_disk(&x.label, 64), "seed {s}");
        assert!(x.image.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn enclosure_check_detects_gap() {
    // 5x5 ring with a hole in its top edge
    let mut label = vec![BACKGROUND; 49];
    for y in 1..6 {
        for x in 1..6 {
            label[y * 7 + x] = if y == 3 && x == 3 { LV } else { MYO };
        }
    }
    label[2 * 7 + 3] = LV;
    assert!(ring_encloses_disk(&label, 7));
    label[7 + 3] = BACKGROUND;
    assert!(!ring_encloses_disk(&label, 7));
    label[7 + 3] = MYO;
    assert!(ring_encloses_disk(&label, 7));
}

#[test]
fn vendor_d_has_lower_contrast_than_a() {
    for s in 0..100u64 {
        let a = michelson_contrast(generate(s, Vendor::A, 64).unwrap().image.data());
        let d = michelson_contrast(generate(s, Vendor::D, 64).unwrap().image.data());
        assert!(d < a, "seed {s}: D {d} >= A {a}");
    }
}

#[test]
fn identity_augmentation_is_noop() {
    let s = generate(3, Vendor::A, 64).unwrap();
    let out = augment_with(&s, &AugmentParams::identity(), &mut SplitMix64::new(1)).unwrap();
    assert_eq!(out.image.data(), s.image.data());
    assert_eq!(out.label, s.label);
}

#[test]
fn quarter_turn_preserves_class_counts() {
    let p = AugmentParams { rotation_deg: 90.0, ..AugmentParams::identity() };
    for seed in 0..10u64 {
        let s = generate(seed, Vendor::A, 64).unwrap();
        let r = augment_with(&s, &p, &mut SplitMix64::new(0)).unwrap();
        for (a, b) in s.class_counts().iter().zip(r.class_counts()) {
            let tol = (*a as f64 * 0.01).max(1.0);
            assert!((*a as f64 - b as f64).abs() <= tol, "seed {seed}: {a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn augmentation_keeps_values_in_range(seed in 0u64..1000, aug in any::<u64>()) {
        let s = generate(seed, Vendor::B, 32).unwrap();
        let out = augment(&s, aug).unwrap();
        prop_assert!(out.label.iter().all(|&l| (l as usize) < NUM_CLASSES));
        prop_assert!(out.image.data().iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(out.image.shape(), s.image.shape());
    }
}

#[test]
fn default_splits_follow_protocol() {
    let cfg = SplitConfig { size: 32, ..SplitConfig::default() };
    let m = make_splits(&cfg).unwrap();
    let count = |split: Split, v: Vendor| m.split(split).filter(|e| e.vendor == v).count();
    assert_eq!((count(Split::Train, Vendor::A), count(Split::Train, Vendor::B)), (75, 75));
    assert_eq!(count(Split::Train, Vendor::C) + count(Split::Train, Vendor::D), 0);
    for v in Vendor::ALL {
        assert_eq!(count(Split::Test, v), 50);
    }
    let train: std::collections::HashSet<u64> = m.split(Split::Train).map(|e| e.seed).collect();
    assert!(m.split(Split::Test).all(|e| !train.contains(&e.seed)));
    assert!(m.split(Split::Val).all(|e| !train.contains(&e.seed)));
}

#[test]
fn overlapping_seed_ranges_rejected() {
    let cfg = SplitConfig { test_seed_start: 100, size: 32, ..SplitConfig::default() };
    assert!(matches!(make_splits(&cfg), Err(Error::Config(_))));
}

#[test]
fn manifest_round_trips_and_exports() {
    let cfg = SplitConfig { n_train: 4, n_val: 2, n_test: 4, size: 32, ..SplitConfig::default() };
    let m = make_splits(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    m.export(dir.path()).unwrap();
    let back = DatasetManifest::load_json(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(back, m);
    let (w, h, maxval, px) = read_pgm(&dir.path().join("labels/test_200003_D.pgm")).unwrap();
    assert_eq!((w, h, maxval), (32, 32, 255));
    let s = generate(200_003, Vendor::D, 32).unwrap();
    assert!(px.iter().zip(&s.label).all(|(a, b)| *a == u16::from(*b)));
    let (_, _, maxval, img) = read_pgm(&dir.path().join("images/train_0_A.pgm")).unwrap();
    assert_eq!(maxval, 65535);
    let s = generate(0, Vendor::A, 32).unwrap();
    for (a, b) in img.iter().zip(s.image.data()) {
        assert!((f64::from(*a) / 65535.0 - b).abs() <= 0.5 / 65535.0 + 1e-12);
    }
}
