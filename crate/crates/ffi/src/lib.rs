//! C interface to `mdis-core`.
//!
//! Every fallible call returns an [`MdisStatus`]; on failure the message is
//! available from [`mdis_last_error_message`] on the same thread. Maps are
//! opaque and must be released with [`mdis_map_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mdis_core::image_io::load_image;
use mdis_core::metrics::{auc, lcc, nss, roc, FixationSet};
use mdis_core::saliency::{
    compute_saliency, compute_saliency_luminance, ModeConfig, SaliencyOptions,
};
use mdis_core::Error;
use ndarray::{Array2, ArrayView2};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdisStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidMode = 3,
    Io = 4,
    UnsupportedFormat = 5,
    CorruptImage = 6,
    NoFixations = 7,
    Degenerate = 8,
    Internal = 9,
    Panic = 10,
}

/// A normalised saliency map, row-major, values in `[0,1]`.
pub struct MdisMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> MdisStatus {
    match e {
        Error::MissingFile(_) | Error::Io(_) | Error::Csv(_) => MdisStatus::Io,
        Error::UnsupportedFormat { .. } => MdisStatus::UnsupportedFormat,
        Error::CorruptImage { .. } => MdisStatus::CorruptImage,
        Error::InvalidMode(_) => MdisStatus::InvalidMode,
        Error::NoFixations | Error::FixationOutOfBounds { .. } => MdisStatus::NoFixations,
        Error::EmptyClass | Error::SingleSubject => MdisStatus::Degenerate,
        Error::EmptyImage
        | Error::InvalidMinSide(_)
        | Error::DepthTooLarge { .. }
        | Error::DimensionMismatch { .. }
        | Error::WindowOutOfBounds { .. } => MdisStatus::InvalidArgument,
        _ => MdisStatus::Internal,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (MdisStatus, String)>) -> MdisStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MdisStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MdisStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (MdisStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (MdisStatus, String) {
    (MdisStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (MdisStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (MdisStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn view<'a>(
    p: *const f64,
    width: usize,
    height: usize,
    what: &str,
) -> Result<ArrayView2<'a, f64>, (MdisStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    if width == 0 || height == 0 {
        return Err((MdisStatus::InvalidArgument, format!("{what} is empty")));
    }
    let n = width
        .checked_mul(height)
        .ok_or((MdisStatus::InvalidArgument, format!("{what} is too large")))?;
    Ok(ArrayView2::from_shape((height, width), std::slice::from_raw_parts(p, n)).expect("shape"))
}

unsafe fn fixations(
    xs: *const f64,
    ys: *const f64,
    n: usize,
) -> Result<FixationSet, (MdisStatus, String)> {
    if n == 0 {
        return Err((MdisStatus::NoFixations, "no fixations".into()));
    }
    if xs.is_null() || ys.is_null() {
        return Err(null("fixation array"));
    }
    let (xs, ys) = (
        std::slice::from_raw_parts(xs, n),
        std::slice::from_raw_parts(ys, n),
    );
    let mut f = FixationSet::new("");
    for (&x, &y) in xs.iter().zip(ys) {
        f.push("", x, y);
    }
    Ok(f)
}

fn parse_mode(mode: &str) -> Result<ModeConfig, (MdisStatus, String)> {
    mode.parse().map_err(core_err)
}

unsafe fn emit(out: *mut *mut MdisMap, values: Array2<f64>) {
    let (height, width) = values.dim();
    let data = values.iter().copied().collect();
    *out = Box::into_raw(Box::new(MdisMap {
        width,
        height,
        data,
    }));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mdis_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library on this thread.
#[no_mangle]
pub extern "C" fn mdis_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Saliency map of a row-major luminance image with values in `[0,1]`.
///
/// # Safety
/// `luminance` must point to `width * height` doubles, `mode` to a
/// NUL-terminated string and `out` to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn mdis_saliency_from_luminance(
    luminance: *const f64,
    width: usize,
    height: usize,
    mode: *const c_char,
    out: *mut *mut MdisMap,
) -> MdisStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let lum = view(luminance, width, height, "luminance")?.to_owned();
        let mode = parse_mode(c_str(mode, "mode")?)?;
        let map = compute_saliency_luminance(&lum, mode, &SaliencyOptions::default())
            .map_err(core_err)?;
        emit(out, map.values);
        Ok(())
    })
}

/// Saliency map of a PNG or PPM file.
///
/// # Safety
/// `path` and `mode` must be NUL-terminated strings and `out` writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn mdis_saliency_from_file(
    path: *const c_char,
    mode: *const c_char,
    out: *mut *mut MdisMap,
) -> MdisStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = c_str(path, "path")?;
        let mode = parse_mode(c_str(mode, "mode")?)?;
        let img = load_image(path).map_err(core_err)?;
        let map = compute_saliency(&img, mode, &SaliencyOptions::default()).map_err(core_err)?;
        emit(out, map.values);
        Ok(())
    })
}

/// # Safety
/// `map` must be null or a live map from this library.
#[no_mangle]
pub unsafe extern "C" fn mdis_map_width(map: *const MdisMap) -> usize {
    map.as_ref().map_or(0, |m| m.width)
}

/// # Safety
/// `map` must be null or a live map from this library.
#[no_mangle]
pub unsafe extern "C" fn mdis_map_height(map: *const MdisMap) -> usize {
    map.as_ref().map_or(0, |m| m.height)
}

/// Row-major values, `width * height` doubles owned by the map.
///
/// # Safety
/// `map` must be null or a live map from this library.
#[no_mangle]
pub unsafe extern "C" fn mdis_map_data(map: *const MdisMap) -> *const f64 {
    map.as_ref().map_or(ptr::null(), |m| m.data.as_ptr())
}

/// # Safety
/// `map` must be null or a map from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mdis_map_free(map: *mut MdisMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Area under the ROC curve of `map` against fixations `(xs[i], ys[i])`.
///
/// # Safety
/// `map` must point to `width * height` doubles, `xs` and `ys` to `n`
/// doubles each, and `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn mdis_auc(
    map: *const f64,
    width: usize,
    height: usize,
    xs: *const f64,
    ys: *const f64,
    n: usize,
    out: *mut f64,
) -> MdisStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = view(map, width, height, "map")?.to_owned();
        let f = fixations(xs, ys, n)?;
        *out = auc(&roc(&s, &f).map_err(core_err)?);
        Ok(())
    })
}

/// Normalised scanpath saliency. Returns `MDIS_STATUS_DEGENERATE` with
/// `*out = 0` for a constant map.
///
/// # Safety
/// As for [`mdis_auc`].
#[no_mangle]
pub unsafe extern "C" fn mdis_nss(
    map: *const f64,
    width: usize,
    height: usize,
    xs: *const f64,
    ys: *const f64,
    n: usize,
    out: *mut f64,
) -> MdisStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = view(map, width, height, "map")?.to_owned();
        let f = fixations(xs, ys, n)?;
        let score = nss(&s, &f).map_err(core_err)?;
        *out = score.value;
        if score.degenerate {
            return Err((MdisStatus::Degenerate, "constant map".into()));
        }
        Ok(())
    })
}

/// Linear correlation of two maps of equal size. Returns
/// `MDIS_STATUS_DEGENERATE` with `*out = 0` if either is constant.
///
/// # Safety
/// `a` and `b` must point to `width * height` doubles and `out` to one
/// writable double.
#[no_mangle]
pub unsafe extern "C" fn mdis_lcc(
    a: *const f64,
    b: *const f64,
    width: usize,
    height: usize,
    out: *mut f64,
) -> MdisStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = view(a, width, height, "a")?.to_owned();
        let b = view(b, width, height, "b")?.to_owned();
        let score = lcc(&a, &b).map_err(core_err)?;
        *out = score.value;
        if score.degenerate {
            return Err((MdisStatus::Degenerate, "constant map".into()));
        }
        Ok(())
    })
}
