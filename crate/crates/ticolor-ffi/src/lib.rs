//! C ABI for the ticolor library.
//!
//! Conventions:
//! - Every fallible function returns a [`TicolorStatus`]; `Ok` is 0.
//! - On failure a thread-local message is set; read it with
//!   [`ticolor_last_error`].
//! - Image buffers are 8-bit, row-major, interleaved (HxWxC), caller
//!   allocated. Thermal input is single-channel; colorized output is RGB
//!   with exactly `3 * width * height` bytes.
//! - Handles returned by `_load` functions are opaque and must be
//!   released with the matching `_free`; `_free` accepts null.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use candle_core::Device;
use ticolor::error::Error;
use ticolor::generator::Generator;
use ticolor::infer::{colorize_image, load_generator};
use ticolor::metrics::{msssim, nqm, psnr, ssim, NqmParams, Raster, SsimParams};
use ticolor::types::TensorImage;

/// Result of every fallible call in this interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TicolorStatus {
    /// Success.
    Ok = 0,
    /// Bad configuration or argument value.
    Usage = 1,
    /// File I/O or decode failure.
    Io = 2,
    /// Dataset, shape, or degenerate-input failure.
    Data = 3,
    /// Checkpoint missing, corrupt, or incompatible.
    Checkpoint = 4,
    /// Numeric failure.
    Numeric = 5,
    /// A required pointer argument was null.
    NullArgument = 6,
    /// An internal panic was caught at the boundary.
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> TicolorStatus {
    match ticolor::cli::exit_code(e) {
        ticolor::cli::EXIT_USAGE => TicolorStatus::Usage,
        ticolor::cli::EXIT_IO => TicolorStatus::Io,
        ticolor::cli::EXIT_DATA => TicolorStatus::Data,
        ticolor::cli::EXIT_CHECKPOINT => TicolorStatus::Checkpoint,
        _ => TicolorStatus::Numeric,
    }
}

fn fail(e: Error) -> TicolorStatus {
    let code = status_of(&e);
    set_error(e.to_string());
    code
}

fn guarded(f: impl FnOnce() -> TicolorStatus) -> TicolorStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic".into());
            TicolorStatus::Panic
        }
    }
}

/// Copy the message for the most recent failure on this thread into
/// `buf` (NUL-terminated, truncated to `cap`). Returns the full message
/// length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must point to at least `cap` writable bytes, or be null (then
/// only the length is returned).
#[no_mangle]
pub unsafe extern "C" fn ticolor_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// A loaded generator bound to a compute device.
pub struct TicolorGenerator {
    gen: Generator,
    device: Device,
}

/// Load the generator from a training checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` must be a valid
/// pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn ticolor_generator_load(
    path: *const c_char,
    out: *mut *mut TicolorGenerator,
) -> TicolorStatus {
    if path.is_null() || out.is_null() {
        set_error("null argument".into());
        return TicolorStatus::NullArgument;
    }
    guarded(|| {
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            set_error("path is not valid UTF-8".into());
            return TicolorStatus::Usage;
        };
        let device = Device::Cpu;
        match load_generator(Path::new(path), &device) {
            Ok((gen, _config)) => {
                *out = Box::into_raw(Box::new(TicolorGenerator { gen, device }));
                TicolorStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Release a generator handle. Null is ignored.
///
/// # Safety
/// `handle` must come from [`ticolor_generator_load`] and not be freed
/// twice.
#[no_mangle]
pub unsafe extern "C" fn ticolor_generator_free(handle: *mut TicolorGenerator) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Colorize one thermal image.
///
/// `thermal` holds `width * height` grayscale bytes; `rgb_out` receives
/// `3 * width * height` interleaved RGB bytes. Dimensions of any size
/// >= 17 pixels per side are accepted (padded internally).
///
/// # Safety
/// `handle` must be a live generator handle; the buffers must have the
/// stated sizes.
#[no_mangle]
pub unsafe extern "C" fn ticolor_colorize(
    handle: *const TicolorGenerator,
    thermal: *const u8,
    width: usize,
    height: usize,
    rgb_out: *mut u8,
) -> TicolorStatus {
    if handle.is_null() || thermal.is_null() || rgb_out.is_null() {
        set_error("null argument".into());
        return TicolorStatus::NullArgument;
    }
    guarded(|| {
        let handle = &*handle;
        let pixels = std::slice::from_raw_parts(thermal, width * height);
        let data = pixels.iter().map(|&v| ticolor::types::normalize_u8(v)).collect();
        let input = match TensorImage::new(1, height, width, data) {
            Ok(t) => t,
            Err(e) => return fail(e),
        };
        match colorize_image(&handle.gen, &input, &handle.device) {
            Ok(out) => {
                let dst = std::slice::from_raw_parts_mut(rgb_out, 3 * width * height);
                for y in 0..height {
                    for x in 0..width {
                        for c in 0..3 {
                            dst[(y * width + x) * 3 + c] =
                                ticolor::types::denormalize_to_u8(out.get(c, y, x));
                        }
                    }
                }
                TicolorStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

unsafe fn raster_from_raw(
    data: *const u8,
    channels: usize,
    width: usize,
    height: usize,
) -> Result<Raster, Error> {
    if channels != 1 && channels != 3 {
        return Err(Error::ShapeError(format!("channels must be 1 or 3, got {channels}")));
    }
    let src = std::slice::from_raw_parts(data, channels * width * height);
    // interleaved input, planar storage
    let mut planar = vec![0.0f64; channels * width * height];
    for i in 0..width * height {
        for c in 0..channels {
            planar[c * width * height + i] = src[i * channels + c] as f64;
        }
    }
    Raster::new(channels, height, width, planar)
}

type Metric = fn(&Raster, &Raster) -> Result<f64, Error>;

unsafe fn metric_call(
    pred: *const u8,
    reference: *const u8,
    channels: usize,
    width: usize,
    height: usize,
    out: *mut f64,
    f: Metric,
) -> TicolorStatus {
    if pred.is_null() || reference.is_null() || out.is_null() {
        set_error("null argument".into());
        return TicolorStatus::NullArgument;
    }
    guarded(|| {
        let p = match raster_from_raw(pred, channels, width, height) {
            Ok(r) => r,
            Err(e) => return fail(e),
        };
        let r = match raster_from_raw(reference, channels, width, height) {
            Ok(r) => r,
            Err(e) => return fail(e),
        };
        match f(&p, &r) {
            Ok(v) => {
                *out = v;
                TicolorStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Peak signal-to-noise ratio in dB over 8-bit interleaved images.
/// Identical inputs yield +infinity.
///
/// # Safety
/// Buffers must hold `channels * width * height` bytes; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ticolor_psnr(
    pred: *const u8,
    reference: *const u8,
    channels: usize,
    width: usize,
    height: usize,
    out: *mut f64,
) -> TicolorStatus {
    metric_call(pred, reference, channels, width, height, out, |p, r| psnr(p, r, 255.0))
}

/// Mean structural similarity (11x11 Gaussian window) on the luma plane.
///
/// # Safety
/// As for [`ticolor_psnr`]; both sides must be at least 11x11.
#[no_mangle]
pub unsafe extern "C" fn ticolor_ssim(
    pred: *const u8,
    reference: *const u8,
    channels: usize,
    width: usize,
    height: usize,
    out: *mut f64,
) -> TicolorStatus {
    metric_call(pred, reference, channels, width, height, out, |p, r| {
        ssim(p, r, &SsimParams::default())
    })
}

/// Multi-scale structural similarity; the scale count adapts to image
/// size.
///
/// # Safety
/// As for [`ticolor_psnr`]; both sides must be at least 11x11.
#[no_mangle]
pub unsafe extern "C" fn ticolor_msssim(
    pred: *const u8,
    reference: *const u8,
    channels: usize,
    width: usize,
    height: usize,
    out: *mut f64,
) -> TicolorStatus {
    metric_call(pred, reference, channels, width, height, out, |p, r| {
        msssim(p, r, &SsimParams::default())
    })
}

/// Noise quality measure in dB.
///
/// # Safety
/// As for [`ticolor_psnr`]; both sides must be at least 16x16.
#[no_mangle]
pub unsafe extern "C" fn ticolor_nqm(
    pred: *const u8,
    reference: *const u8,
    channels: usize,
    width: usize,
    height: usize,
    out: *mut f64,
) -> TicolorStatus {
    metric_call(pred, reference, channels, width, height, out, |p, r| {
        nqm(p, r, &NqmParams::default())
    })
}
