//! C ABI over `lsr-core`.
//!
//! Every entry point returns an [`LsrStatus`]. On failure, a description of
//! the last error on the calling thread is available from
//! [`lsr_last_error_message`]. Images cross the boundary as row-major
//! `double` buffers of luma in [0, 255].

use lsr_core::complexity::{builtin, eval_method};
use lsr_core::decision::{superresolve, LsrModel, Variant};
use lsr_core::imaging::{psnr, ssim, YImage};
use lsr_core::LsrError;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Configuration = 4,
    Training = 5,
    Format = 6,
    Io = 7,
    UnknownMethod = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Opaque handle to a loaded model.
pub struct LsrModelHandle {
    model: LsrModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &LsrError) -> LsrStatus {
    match err {
        LsrError::Dimension(_) => LsrStatus::Dimension,
        LsrError::Parameter(_) => LsrStatus::InvalidArgument,
        LsrError::Configuration(_) => LsrStatus::Configuration,
        LsrError::Training(_) => LsrStatus::Training,
        LsrError::Format(_) => LsrStatus::Format,
        LsrError::UnknownMethod(_) => LsrStatus::UnknownMethod,
        LsrError::Io(_) | LsrError::Image(_) | LsrError::Csv(_) => LsrStatus::Io,
    }
}

struct Fail(LsrStatus, String);

impl From<LsrError> for Fail {
    fn from(e: LsrError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LsrStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LsrStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LsrStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(LsrStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(LsrStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn image_in(p: *const f64, height: usize, width: usize, what: &str) -> Result<YImage, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let n = height.checked_mul(width).ok_or_else(|| Fail(LsrStatus::Dimension, format!("{what} size overflows")))?;
    Ok(YImage::new(height, width, std::slice::from_raw_parts(p, n).to_vec())?)
}

/// Load a model file. On success `*out` owns a handle that must be released
/// with [`lsr_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lsr_model_load(path: *const c_char, out: *mut *mut LsrModelHandle) -> LsrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = c_str(path, "path")?;
        let model = LsrModel::load(path)?;
        *out = Box::into_raw(Box::new(LsrModelHandle { model }));
        Ok(())
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `handle` must come from [`lsr_model_load`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn lsr_model_free(handle: *mut LsrModelHandle) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Model variant: 1 or 2.
///
/// # Safety
/// `handle` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lsr_model_variant(handle: *const LsrModelHandle, out: *mut u32) -> LsrStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = match h.model.variant() {
            Variant::V1 => 1,
            Variant::V2 => 2,
        };
        Ok(())
    })
}

/// Output scale factor of the model.
///
/// # Safety
/// `handle` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lsr_model_scale(handle: *const LsrModelHandle, out: *mut usize) -> LsrStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = h.model.config.scale;
        Ok(())
    })
}

/// Super-resolve a `height x width` luma image into `out`, which must hold
/// `out_len >= (scale*height) * (scale*width)` values.
///
/// # Safety
/// `input` must point to `height*width` doubles and `out` to `out_len`.
#[no_mangle]
pub unsafe extern "C" fn lsr_superresolve(
    handle: *const LsrModelHandle,
    input: *const f64,
    height: usize,
    width: usize,
    out: *mut f64,
    out_len: usize,
) -> LsrStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let lr = image_in(input, height, width, "input")?;
        let s = h.model.config.scale;
        let need = (height * s) * (width * s);
        if out_len < need {
            return Err(Fail(LsrStatus::BufferTooSmall, format!("output needs {need} values, got {out_len}")));
        }
        let sr = superresolve(&h.model, &lr)?;
        std::slice::from_raw_parts_mut(out, need).copy_from_slice(sr.data());
        Ok(())
    })
}

/// PSNR in dB over 8-bit range, ignoring `shave` border pixels. Identical
/// images give +infinity.
///
/// # Safety
/// `a` and `b` must each point to `height*width` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lsr_psnr(
    a: *const f64,
    b: *const f64,
    height: usize,
    width: usize,
    shave: usize,
    out: *mut f64,
) -> LsrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = psnr(&image_in(a, height, width, "a")?, &image_in(b, height, width, "b")?, shave)?;
        Ok(())
    })
}

/// Mean SSIM, ignoring `shave` border pixels.
///
/// # Safety
/// Same as [`lsr_psnr`].
#[no_mangle]
pub unsafe extern "C" fn lsr_ssim(
    a: *const f64,
    b: *const f64,
    height: usize,
    width: usize,
    shave: usize,
    out: *mut f64,
) -> LsrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ssim(&image_in(a, height, width, "a")?, &image_in(b, height, width, "b")?, shave)?;
        Ok(())
    })
}

/// Total FLOPs, FLOPs per pixel and parameter count of a built-in method
/// (`aplus`, `srcnn`, `vdsr`, `lsr-v1`, `lsr-v2`) for a `height x width` output.
/// Any of the out pointers may be null.
///
/// # Safety
/// `method` must be NUL-terminated; non-null out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn lsr_complexity_total(
    method: *const c_char,
    height: u64,
    width: u64,
    out_flops: *mut f64,
    out_flops_per_pixel: *mut f64,
    out_params: *mut u64,
) -> LsrStatus {
    guard(|| {
        let name = c_str(method, "method")?;
        let report = eval_method(&builtin(name, (height, width))?)?;
        if let Some(o) = out_flops.as_mut() {
            *o = report.total.flops;
        }
        if let Some(o) = out_flops_per_pixel.as_mut() {
            *o = report.total.fp;
        }
        if let Some(o) = out_params.as_mut() {
            *o = report.total.params;
        }
        Ok(())
    })
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn lsr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}
