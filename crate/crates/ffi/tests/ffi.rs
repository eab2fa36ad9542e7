use std::ffi::{CStr, CString};
use std::ptr;

use utnet_ffi::*;

fn last_error() -> String {
    let p = utnet_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

const TINY: &str = r#"{"base_channels": 4, "levels": 3, "attention_levels": "12",
    "attention": {"heads": 2, "reduced_size": 4}}"#;

fn tiny_model() -> *mut UtnetModel {
    let cfg = CString::new(TINY).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { utnet_model_from_json(cfg.as_ptr(), 7, &mut m) }, UtnetStatus::Ok, "{}", last_error());
    assert!(!m.is_null());
    m
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(utnet_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn model_lifecycle_and_segmentation() {
    let m = tiny_model();
    let mut n = 0u64;
    assert_eq!(unsafe { utnet_model_num_params(m, &mut n) }, UtnetStatus::Ok);
    assert!(n > 0);

    let size = 16;
    let mut img = vec![0.0; size * size];
    let mut gt = vec![0u8; size * size];
    assert_eq!(unsafe { utnet_synth_generate(3, 0, size, img.as_mut_ptr(), gt.as_mut_ptr()) }, UtnetStatus::Ok);
    assert!(img.iter().all(|v| (0.0..=1.0).contains(v)));
    let mut labels = vec![255u8; size * size];
    assert_eq!(unsafe { utnet_model_segment(m, img.as_ptr(), size, labels.as_mut_ptr()) }, UtnetStatus::Ok);
    assert!(labels.iter().all(|&l| l < 4));
    unsafe { utnet_model_free(m) };
    unsafe { utnet_model_free(ptr::null_mut()) };
}

#[test]
fn config_errors_map_to_status() {
    let bad = CString::new(r#"{"no_such_key": 1}"#).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { utnet_model_from_json(bad.as_ptr(), 0, &mut m) }, UtnetStatus::Config);
    assert!(m.is_null());
    assert!(last_error().contains("no_such_key"));

    let mut img = vec![0.0; 100];
    assert_eq!(unsafe { utnet_synth_generate(0, 0, 10, img.as_mut_ptr(), ptr::null_mut()) }, UtnetStatus::Config);
    assert_eq!(unsafe { utnet_synth_generate(0, 9, 16, ptr::null_mut(), ptr::null_mut()) }, UtnetStatus::Config);
    assert!(last_error().contains("vendor"));
}

#[test]
fn null_pointers_are_rejected() {
    let mut out = 0.0;
    let a = [1u8; 4];
    assert_eq!(unsafe { utnet_dice(ptr::null(), a.as_ptr(), 4, 1, &mut out) }, UtnetStatus::NullPointer);
    assert!(last_error().contains("pred"));
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { utnet_model_load(ptr::null(), &mut m) }, UtnetStatus::NullPointer);
    assert_eq!(unsafe { utnet_model_num_params(ptr::null(), ptr::null_mut()) }, UtnetStatus::NullPointer);
}

#[test]
fn missing_checkpoint_reports_error() {
    let dir = CString::new("/nonexistent/utnet/checkpoint").unwrap();
    let mut m = ptr::null_mut();
    let s = unsafe { utnet_model_load(dir.as_ptr(), &mut m) };
    assert_ne!(s, UtnetStatus::Ok);
    assert!(m.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn metrics_match_library() {
    // 4x4, class 1 in the left half of pred and the top half of gt
    let pred: Vec<u8> = (0..16).map(|i| u8::from(i % 4 < 2)).collect();
    let gt: Vec<u8> = (0..16).map(|i| u8::from(i < 8)).collect();
    let mut d = 0.0;
    assert_eq!(unsafe { utnet_dice(pred.as_ptr(), gt.as_ptr(), 16, 1, &mut d) }, UtnetStatus::Ok);
    assert!((d - 0.5).abs() < 1e-12);
    let mut h = 0.0;
    assert_eq!(unsafe { utnet_hausdorff(pred.as_ptr(), gt.as_ptr(), 4, 4, 1, &mut h) }, UtnetStatus::Ok);
    let want = utnet::metrics::hausdorff(&pred, &gt, 4, 4, 1).unwrap();
    assert_eq!(h, want);
}

#[test]
fn flops_ratio_is_n_over_k() {
    let (n, k) = (32 * 32, 64);
    let s = utnet_attention_flops(UtnetAttention::Standard, n, k, 8, 4);
    let e = utnet_attention_flops(UtnetAttention::Efficient, n, k, 8, 4);
    assert_eq!(s / e, (n / k) as f64);
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/utnet.h");
    for name in [
        "utnet_last_error",
        "utnet_version",
        "utnet_model_new_default",
        "utnet_model_from_json",
        "utnet_model_load",
        "utnet_model_free",
        "utnet_model_num_params",
        "utnet_model_segment",
        "utnet_synth_generate",
        "utnet_dice",
        "utnet_hausdorff",
        "utnet_attention_flops",
        "typedef struct UtnetModel UtnetModel",
        "UTNET_STATUS_VERIFICATION = 4",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
