//! C ABI over the engagement-prediction core: load a trained model from its
//! JSON form, run predictions, and extract the 13 content features from raw
//! transcript text.
//!
//! Handles are opaque pointers owned by this library; every constructor has
//! a matching `_free`. Functions report failures through [`LectrankStatus`]
//! and a thread-local message readable via [`lectrank_last_error_message`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::path::Path;

use libc::{c_char, size_t};

use lectrank::features::{content_features_from_text, FeatureMode, Lexicons};
use lectrank::models::TrainedModel;

/// Status codes returned by fallible functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LectrankStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    IoError = 4,
    ShapeMismatch = 5,
    FeatureError = 6,
    BufferTooSmall = 7,
}

/// Opaque handle to a trained model.
pub struct LectrankModel {
    inner: TrainedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<Vec<u8>>) {
    let message = CString::new(message).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message);
}

/// Message describing the most recent failure on the calling thread. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lectrank_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lectrank_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

unsafe fn cstr_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, LectrankStatus> {
    if ptr.is_null() {
        set_error(format!("{name} is null"));
        return Err(LectrankStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("{name} is not valid UTF-8"));
        LectrankStatus::InvalidUtf8
    })
}

fn load_model(json: &str) -> Result<*mut LectrankModel, LectrankStatus> {
    match TrainedModel::from_json(json) {
        Ok(inner) => Ok(Box::into_raw(Box::new(LectrankModel { inner }))),
        Err(e) => {
            set_error(e.to_string());
            Err(LectrankStatus::ParseError)
        }
    }
}

/// Deserialize a model from its JSON form. Returns null on failure; consult
/// [`lectrank_last_error_message`].
///
/// # Safety
/// `json` must be a NUL-terminated string valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn lectrank_model_load_json(json: *const c_char) -> *mut LectrankModel {
    let Ok(json) = cstr_arg(json, "json") else {
        return std::ptr::null_mut();
    };
    load_model(json).unwrap_or(std::ptr::null_mut())
}

/// Load a model.json file from disk. Returns null on failure.
///
/// # Safety
/// `path` must be a NUL-terminated string valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn lectrank_model_load_file(path: *const c_char) -> *mut LectrankModel {
    let Ok(path) = cstr_arg(path, "path") else {
        return std::ptr::null_mut();
    };
    let json = match std::fs::read_to_string(Path::new(path)) {
        Ok(text) => text,
        Err(e) => {
            set_error(format!("{path}: {e}"));
            return std::ptr::null_mut();
        }
    };
    load_model(&json).unwrap_or(std::ptr::null_mut())
}

/// Number of input features the model expects.
///
/// # Safety
/// `model` must be null or a pointer returned by a `lectrank_model_load_*`
/// function that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn lectrank_model_feature_count(model: *const LectrankModel) -> size_t {
    if model.is_null() {
        return 0;
    }
    (*model).inner.feature_names.len()
}

/// Copy the NUL-terminated name of feature `index` into `buf`.
///
/// # Safety
/// `model` must be a live handle; `buf` must point to `buf_len` writable
/// bytes.
#[no_mangle]
pub unsafe extern "C" fn lectrank_model_feature_name(
    model: *const LectrankModel,
    index: size_t,
    buf: *mut c_char,
    buf_len: size_t,
) -> LectrankStatus {
    if model.is_null() || buf.is_null() {
        set_error("model or buf is null");
        return LectrankStatus::NullArgument;
    }
    let names = &(*model).inner.feature_names;
    let Some(name) = names.get(index) else {
        set_error(format!("feature index {index} out of range ({})", names.len()));
        return LectrankStatus::ShapeMismatch;
    };
    if buf_len < name.len() + 1 {
        set_error(format!("buffer of {buf_len} bytes, need {}", name.len() + 1));
        return LectrankStatus::BufferTooSmall;
    }
    std::ptr::copy_nonoverlapping(name.as_ptr(), buf.cast(), name.len());
    *buf.add(name.len()) = 0;
    LectrankStatus::Ok
}

/// Predict the engagement target for one raw (unscaled) feature row laid out
/// in the model's feature order. Writes the prediction to `out`.
///
/// # Safety
/// `model` must be a live handle, `features` must point to `len` doubles,
/// and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lectrank_model_predict(
    model: *const LectrankModel,
    features: *const f64,
    len: size_t,
    out: *mut f64,
) -> LectrankStatus {
    if model.is_null() || features.is_null() || out.is_null() {
        set_error("model, features, or out is null");
        return LectrankStatus::NullArgument;
    }
    let inner = &(*model).inner;
    if len != inner.feature_names.len() {
        set_error(format!(
            "feature row of {len} values, model expects {}",
            inner.feature_names.len()
        ));
        return LectrankStatus::ShapeMismatch;
    }
    let row = std::slice::from_raw_parts(features, len);
    *out = inner.predict_row(row);
    LectrankStatus::Ok
}

/// Release a model handle. Null is ignored.
///
/// # Safety
/// `model` must be null or a pointer returned by a `lectrank_model_load_*`
/// function, and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lectrank_model_free(model: *mut LectrankModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of values written by [`lectrank_content_features`].
pub const LECTRANK_CONTENT_FEATURE_COUNT: size_t = 13;

/// Extract the 13 content features from raw transcript text using the
/// built-in lexicons, in the canonical column order. `published_days` is the
/// lecture's publication date as days since 1970-01-01 and is passed through
/// as the final feature.
///
/// # Safety
/// `transcript` and `title` must be NUL-terminated strings; `out` must point
/// to at least `out_len >= 13` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lectrank_content_features(
    transcript: *const c_char,
    title: *const c_char,
    published_days: i64,
    out: *mut f64,
    out_len: size_t,
) -> LectrankStatus {
    let transcript = match cstr_arg(transcript, "transcript") {
        Ok(s) => s,
        Err(status) => return status,
    };
    let title = match cstr_arg(title, "title") {
        Ok(s) => s,
        Err(status) => return status,
    };
    if out.is_null() {
        set_error("out is null");
        return LectrankStatus::NullArgument;
    }
    if out_len < LECTRANK_CONTENT_FEATURE_COUNT {
        set_error(format!(
            "out buffer holds {out_len} doubles, need {LECTRANK_CONTENT_FEATURE_COUNT}"
        ));
        return LectrankStatus::BufferTooSmall;
    }
    match content_features_from_text(transcript, title, published_days, &Lexicons::builtin()) {
        Ok(fv) => {
            let row = fv.to_row(FeatureMode::ContentOnly);
            std::ptr::copy_nonoverlapping(row.as_ptr(), out, row.len());
            LectrankStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            LectrankStatus::FeatureError
        }
    }
}
