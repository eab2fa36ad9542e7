//! C ABI over the `utnet` library.
//!
//! Conventions:
//! - every fallible function returns a [`UtnetStatus`]; on failure a message
//!   is kept per thread and readable through [`utnet_last_error`];
//! - models are opaque [`UtnetModel`] handles, created by `utnet_model_*`
//!   constructors and released with [`utnet_model_free`];
//! - output buffers are caller-allocated, with sizes stated per function;
//! - panics never cross the boundary and surface as `UTNET_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use utnet::bench::{flops_model, Variant};
use utnet::metrics::{argmax_classes, dice_score, hausdorff};
use utnet::model::{load_checkpoint, Model, UTNetConfig};
use utnet::synthdata::{generate, stack_inputs, SegmentationSample, Vendor};
use utnet::tensor::Tensor;
use utnet::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UtnetStatus {
    Ok = 0,
    /// Library failure without a more specific category.
    Internal = 1,
    /// Invalid configuration or argument value.
    Config = 2,
    /// Invalid or inconsistent data.
    Data = 3,
    Verification = 4,
    /// A required pointer argument was null.
    NullPointer = 5,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 6,
    /// The library panicked; the handle involved should be discarded.
    Panic = 7,
}

/// Opaque network handle.
pub struct UtnetModel {
    model: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn from_error(e: Error) -> UtnetStatus {
    let status = match e.exit_code() {
        2 => UtnetStatus::Config,
        3 => UtnetStatus::Data,
        4 => UtnetStatus::Verification,
        _ => UtnetStatus::Internal,
    };
    set_error(e.to_string());
    status
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), UtnetStatus>) -> UtnetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UtnetStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside utnet".into());
            UtnetStatus::Panic
        }
    }
}

fn lib<T>(r: utnet::Result<T>) -> Result<T, UtnetStatus> {
    r.map_err(from_error)
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), UtnetStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(UtnetStatus::NullPointer);
    }
    Ok(())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, UtnetStatus> {
    non_null(p, what)?;
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        UtnetStatus::InvalidUtf8
    })
}

fn config_err(msg: String) -> UtnetStatus {
    set_error(msg);
    UtnetStatus::Config
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn utnet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn utnet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn store(out: *mut *mut UtnetModel, model: Model) {
    // SAFETY: callers check `out` for null first.
    unsafe { *out = Box::into_raw(Box::new(UtnetModel { model })) };
}

/// Builds a network with the default configuration, initialised from `seed`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn utnet_model_new_default(seed: u64, out: *mut *mut UtnetModel) -> UtnetStatus {
    guard(|| {
        non_null(out, "out")?;
        store(out, lib(Model::build(&UTNetConfig::default(), seed))?);
        Ok(())
    })
}

/// Builds a network from a JSON model configuration (the `model` section of
/// a run configuration).
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` as above.
#[no_mangle]
pub unsafe extern "C" fn utnet_model_from_json(
    config_json: *const c_char,
    seed: u64,
    out: *mut *mut UtnetModel,
) -> UtnetStatus {
    guard(|| {
        non_null(out, "out")?;
        let text = str_arg(config_json, "config_json")?;
        let cfg: UTNetConfig = lib(serde_json::from_str(text).map_err(Error::from))?;
        store(out, lib(Model::build(&cfg, seed))?);
        Ok(())
    })
}

/// Loads a checkpoint directory written by training.
///
/// # Safety
/// `dir` must be a NUL-terminated path; `out` as above.
#[no_mangle]
pub unsafe extern "C" fn utnet_model_load(dir: *const c_char, out: *mut *mut UtnetModel) -> UtnetStatus {
    guard(|| {
        non_null(out, "out")?;
        let dir = str_arg(dir, "dir")?;
        let (model, _) = lib(load_checkpoint(Path::new(dir)))?;
        store(out, model);
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn utnet_model_free(model: *mut UtnetModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of trainable scalars.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn utnet_model_num_params(model: *const UtnetModel, out: *mut u64) -> UtnetStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        *out = (*model).model.num_params() as u64;
        Ok(())
    })
}

/// Segments one `size x size` image (row-major, values in [0, 1]) into
/// class labels. The image is standardised exactly as during training.
///
/// # Safety
/// `image` must hold `size * size` doubles and `labels_out` room for
/// `size * size` bytes.
#[no_mangle]
pub unsafe extern "C" fn utnet_model_segment(
    model: *const UtnetModel,
    image: *const f64,
    size: usize,
    labels_out: *mut u8,
) -> UtnetStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(image, "image")?;
        non_null(labels_out, "labels_out")?;
        if size == 0 {
            return Err(config_err("size must be positive".into()));
        }
        let n = size * size;
        let pixels = std::slice::from_raw_parts(image, n).to_vec();
        let sample = SegmentationSample {
            image: lib(Tensor::new(pixels, &[1, size, size]))?,
            label: vec![0; n],
            size,
            vendor: Vendor::A,
            seed: 0,
            bump: 0,
        };
        let (x, _) = lib(stack_inputs(&[&sample]))?;
        let logits = lib((*model).model.predict(&x))?;
        let labels = lib(argmax_classes(&logits))?;
        std::slice::from_raw_parts_mut(labels_out, n).copy_from_slice(&labels[0]);
        Ok(())
    })
}

/// Generates phantom `seed` for `vendor` (0..=3 for A..D).
///
/// # Safety
/// `image_out` must have room for `size * size` doubles and `labels_out`
/// for `size * size` bytes; either may be null to skip it.
#[no_mangle]
pub unsafe extern "C" fn utnet_synth_generate(
    seed: u64,
    vendor: u32,
    size: usize,
    image_out: *mut f64,
    labels_out: *mut u8,
) -> UtnetStatus {
    guard(|| {
        let vendor = *Vendor::ALL
            .get(vendor as usize)
            .ok_or_else(|| config_err(format!("vendor index {vendor} out of range 0..=3")))?;
        let s = lib(generate(seed, vendor, size))?;
        let n = size * size;
        if !image_out.is_null() {
            std::slice::from_raw_parts_mut(image_out, n).copy_from_slice(s.image.data());
        }
        if !labels_out.is_null() {
            std::slice::from_raw_parts_mut(labels_out, n).copy_from_slice(&s.label);
        }
        Ok(())
    })
}

/// Dice score of `class` between two label maps of `len` pixels.
///
/// # Safety
/// `pred` and `gt` must hold `len` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn utnet_dice(
    pred: *const u8,
    gt: *const u8,
    len: usize,
    class: u8,
    out: *mut f64,
) -> UtnetStatus {
    guard(|| {
        non_null(pred, "pred")?;
        non_null(gt, "gt")?;
        non_null(out, "out")?;
        let (p, g) = (std::slice::from_raw_parts(pred, len), std::slice::from_raw_parts(gt, len));
        *out = lib(dice_score(p, g, class))?;
        Ok(())
    })
}

/// Symmetric boundary Hausdorff distance (pixels) of `class` between two
/// `h x w` label maps.
///
/// # Safety
/// `pred` and `gt` must hold `h * w` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn utnet_hausdorff(
    pred: *const u8,
    gt: *const u8,
    h: usize,
    w: usize,
    class: u8,
    out: *mut f64,
) -> UtnetStatus {
    guard(|| {
        non_null(pred, "pred")?;
        non_null(gt, "gt")?;
        non_null(out, "out")?;
        let n = h * w;
        let (p, g) = (std::slice::from_raw_parts(pred, n), std::slice::from_raw_parts(gt, n));
        *out = lib(hausdorff(p, g, h, w, class))?;
        Ok(())
    })
}

/// Attention variant for [`utnet_attention_flops`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UtnetAttention {
    Standard = 0,
    Efficient = 1,
}

/// Analytic operation count of one attention layer (see the bench module).
#[no_mangle]
pub extern "C" fn utnet_attention_flops(variant: UtnetAttention, n: usize, k: usize, d: usize, heads: usize) -> f64 {
    let v = match variant {
        UtnetAttention::Standard => Variant::Standard,
        UtnetAttention::Efficient => Variant::Efficient,
    };
    flops_model(v, n, k, d, heads)
}
