//! C interface to the ivcnav localizer.
//!
//! Models and clips are opaque handles created and released by this library.
//! Every fallible call returns an [`IvcStatus`]; on failure the message is
//! available from [`ivc_last_error`] until the next call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ivcnav::localizer::{localize, LocalizationStatus, LocalizerConfig};
use ivcnav::model::{decode_weights, forward, load_weights, ModelSpec, Weights};
use ivcnav::phantom::{decode_clip, read_clip};
use ivcnav::tensor::VideoClip;
use ivcnav::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IvcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Dimension = 5,
    Config = 6,
    Internal = 7,
}

/// Outcome of localization, mirrors the sidecar `status` field.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IvcLocalizeStatus {
    Located = 0,
    GatedNegative = 1,
    EmptyAfterFiltering = 2,
}

/// Trained network (opaque).
pub struct IvcModel {
    spec: ModelSpec,
    weights: Weights<f32>,
    config: LocalizerConfig,
}

/// Grayscale clip, `t` frames of `h` x `w` (opaque).
pub struct IvcClip(VideoClip);

/// Localization output. The annotation fields are zero unless `status` is
/// `Located`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvcLocalization {
    pub logit: f64,
    pub present: bool,
    pub status: IvcLocalizeStatus,
    pub center_h: f64,
    pub center_w: f64,
    pub radius: f64,
    pub n_survivors: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> IvcStatus {
    match e {
        Error::Io { .. } => IvcStatus::Io,
        Error::WeightFile(_) | Error::ClipFile(_) | Error::Json(_) => IvcStatus::Format,
        Error::Dimension { .. } => IvcStatus::Dimension,
        Error::Config(_) | Error::UnknownTap(_) | Error::UnknownParam(_) => IvcStatus::Config,
        Error::Validation(_) => IvcStatus::InvalidArgument,
        _ => IvcStatus::Internal,
    }
}

/// Runs `f`, recording errors and converting panics into `Internal`.
fn guard(f: impl FnOnce() -> Result<(), (IvcStatus, String)>) -> IvcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IvcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            IvcStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (IvcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (IvcStatus, String) {
    (IvcStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (IvcStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (IvcStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (IvcStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

fn new_model(spec: ModelSpec, weights: Weights<f32>) -> Result<Box<IvcModel>, (IvcStatus, String)> {
    let config = LocalizerConfig::default();
    spec.tap_layer(&config.tap_name).map_err(lib_err)?;
    Ok(Box::new(IvcModel { spec, weights, config }))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ivc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library.
#[no_mangle]
pub extern "C" fn ivc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads an NNWF weight file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ivc_model_load(path: *const c_char, out: *mut *mut IvcModel) -> IvcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let (spec, weights) = load_weights(path_arg(path, "path")?).map_err(lib_err)?;
        *out = Box::into_raw(new_model(spec, weights)?);
        Ok(())
    })
}

/// Decodes NNWF bytes.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ivc_model_from_bytes(data: *const u8, len: usize, out: *mut *mut IvcModel) -> IvcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if data.is_null() {
            return Err(null("data"));
        }
        let (spec, weights) = decode_weights(std::slice::from_raw_parts(data, len)).map_err(lib_err)?;
        *out = Box::into_raw(new_model(spec, weights)?);
        Ok(())
    })
}

/// Input dims `[t, h, w]` the model expects.
///
/// # Safety
/// `model` must come from this library; `dims` must hold three values.
#[no_mangle]
pub unsafe extern "C" fn ivc_model_input_dims(model: *const IvcModel, dims: *mut usize) -> IvcStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if dims.is_null() {
            return Err(null("dims"));
        }
        std::slice::from_raw_parts_mut(dims, 3).copy_from_slice(&m.spec.input_dims);
        Ok(())
    })
}

/// Sets the candidate count of the localizer.
///
/// # Safety
/// `model` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn ivc_model_set_candidates(model: *mut IvcModel, n: usize) -> IvcStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        let mut config = m.config.clone();
        config.n_candidates = n;
        config.validate().map_err(lib_err)?;
        m.config = config;
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards. NULL is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn ivc_model_free(model: *mut IvcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Copies `t*h*w` intensities in `[0, 1]`, frame-major, into a new clip.
///
/// # Safety
/// `data` must point to `t*h*w` floats and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ivc_clip_from_frames(
    data: *const f32,
    t: usize,
    h: usize,
    w: usize,
    out: *mut *mut IvcClip,
) -> IvcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if data.is_null() {
            return Err(null("data"));
        }
        let n = t
            .checked_mul(h)
            .and_then(|v| v.checked_mul(w))
            .ok_or((IvcStatus::InvalidArgument, "clip size overflows".to_owned()))?;
        let frames = std::slice::from_raw_parts(data, n).to_vec();
        let clip = VideoClip::from_frames([t, h, w], frames).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(IvcClip(clip)));
        Ok(())
    })
}

/// Reads a GVID clip file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ivc_clip_load(path: *const c_char, out: *mut *mut IvcClip) -> IvcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let clip = read_clip(std::path::Path::new(path_arg(path, "path")?)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(IvcClip(clip)));
        Ok(())
    })
}

/// Decodes GVID bytes.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ivc_clip_from_bytes(data: *const u8, len: usize, out: *mut *mut IvcClip) -> IvcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if data.is_null() {
            return Err(null("data"));
        }
        let clip = decode_clip(std::slice::from_raw_parts(data, len)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(IvcClip(clip)));
        Ok(())
    })
}

/// # Safety
/// `clip` must come from this library and not be used afterwards. NULL is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn ivc_clip_free(clip: *mut IvcClip) {
    if !clip.is_null() {
        drop(Box::from_raw(clip));
    }
}

/// Decision logit of `clip`.
///
/// # Safety
/// Handles must come from this library; `logit` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ivc_predict(model: *const IvcModel, clip: *const IvcClip, logit: *mut f64) -> IvcStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let c = clip.as_ref().ok_or_else(|| null("clip"))?;
        let out = out_arg(logit, "logit")?;
        *out = forward(&m.spec, &m.weights, &c.0, None).map_err(lib_err)?.value as f64;
        Ok(())
    })
}

/// Decision plus annotation disc for `clip`.
///
/// # Safety
/// Handles must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ivc_localize(
    model: *const IvcModel,
    clip: *const IvcClip,
    out: *mut IvcLocalization,
) -> IvcStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let c = clip.as_ref().ok_or_else(|| null("clip"))?;
        let out = out_arg(out, "out")?;
        let r = localize(&m.spec, &m.weights, &c.0, &m.config).map_err(lib_err)?;
        let a = r.annotation;
        *out = IvcLocalization {
            logit: r.prediction.logit,
            present: r.prediction.present,
            status: match r.status {
                LocalizationStatus::Located => IvcLocalizeStatus::Located,
                LocalizationStatus::GatedNegative => IvcLocalizeStatus::GatedNegative,
                LocalizationStatus::EmptyAfterFiltering => IvcLocalizeStatus::EmptyAfterFiltering,
            },
            center_h: a.map_or(0.0, |a| a.center_h),
            center_w: a.map_or(0.0, |a| a.center_w),
            radius: a.map_or(0.0, |a| a.radius),
            n_survivors: r.survivors.len(),
        };
        Ok(())
    })
}
