//! C interface to the recognizer.
//!
//! Every function returns a [`SymrecStatus`]; on failure the message is
//! available from [`symrec_last_error`] on the same thread. Strings returned
//! through out-parameters are owned by the caller and released with
//! [`symrec_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use symrec::gtw::recording_distance;
use symrec::recognizer::Recognizer;
use symrec::recording::parse_recording;
use symrec::service::{response_body, MAX_RESULTS};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymrecStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Load = 4,
    Parse = 5,
    Classify = 6,
    Panic = 7,
}

/// Opaque loaded recognizer.
pub struct SymrecRecognizer {
    inner: Recognizer,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

type FfiResult<T> = Result<T, (SymrecStatus, String)>;

/// Runs `f`, records its error and maps panics to [`SymrecStatus::Panic`].
fn guard(f: impl FnOnce() -> FfiResult<()>) -> SymrecStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SymrecStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {message}"));
            SymrecStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err((SymrecStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (SymrecStatus::InvalidUtf8, format!("{name}: {e}")))
}

fn out_arg<T>(p: *mut T, name: &str) -> FfiResult<()> {
    if p.is_null() {
        Err((SymrecStatus::NullArgument, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s).expect("JSON has no interior NUL").into_raw()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on this thread.
#[no_mangle]
pub extern "C" fn symrec_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn symrec_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a recognizer bundle (file or directory) into `*out`.
///
/// # Safety
///
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn symrec_recognizer_load(path: *const c_char, out: *mut *mut SymrecRecognizer) -> SymrecStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        out_arg(out, "out")?;
        let inner = Recognizer::load(Path::new(path)).map_err(|e| (SymrecStatus::Load, e.to_string()))?;
        *out = Box::into_raw(Box::new(SymrecRecognizer { inner }));
        Ok(())
    })
}

/// Releases a recognizer. Null is ignored.
///
/// # Safety
///
/// `handle` must come from [`symrec_recognizer_load`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn symrec_recognizer_free(handle: *mut SymrecRecognizer) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of symbols the recognizer distinguishes.
///
/// # Safety
///
/// `handle` must be a live recognizer and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn symrec_recognizer_symbol_count(
    handle: *const SymrecRecognizer,
    out: *mut usize,
) -> SymrecStatus {
    guard(|| {
        let h = handle.as_ref().ok_or((SymrecStatus::NullArgument, "handle is null".into()))?;
        out_arg(out, "out")?;
        *out = h.inner.symbols().len();
        Ok(())
    })
}

/// Classifies a recording given as a JSON stroke array. `*out` receives the
/// `[{"<id>": p}, ...]` list of at most `k` (1 to 10) hypotheses.
///
/// # Safety
///
/// `handle` must be a live recognizer, `recording_json` a NUL-terminated
/// string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn symrec_classify_json(
    handle: *const SymrecRecognizer,
    recording_json: *const c_char,
    k: usize,
    out: *mut *mut c_char,
) -> SymrecStatus {
    guard(|| {
        let h = handle.as_ref().ok_or((SymrecStatus::NullArgument, "handle is null".into()))?;
        let text = str_arg(recording_json, "recording_json")?;
        out_arg(out, "out")?;
        if !(1..=MAX_RESULTS).contains(&k) {
            return Err((SymrecStatus::InvalidArgument, format!("k must be in 1..={MAX_RESULTS}, got {k}")));
        }
        let rec = parse_recording(text).map_err(|e| (SymrecStatus::Parse, e.to_string()))?;
        let result = h
            .inner
            .classify(&rec, k)
            .map_err(|e| (SymrecStatus::Classify, e.to_string()))?;
        *out = c_string(response_body(&result).to_string());
        Ok(())
    })
}

/// Greedy time warping distance between two recordings given as JSON stroke
/// arrays, each flattened to one point sequence.
///
/// # Safety
///
/// Both strings must be NUL-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn symrec_gtw_distance(a_json: *const c_char, b_json: *const c_char, out: *mut f64) -> SymrecStatus {
    guard(|| {
        let a = parse_recording(str_arg(a_json, "a_json")?).map_err(|e| (SymrecStatus::Parse, format!("a: {e}")))?;
        let b = parse_recording(str_arg(b_json, "b_json")?).map_err(|e| (SymrecStatus::Parse, format!("b: {e}")))?;
        out_arg(out, "out")?;
        *out = recording_distance(&a, &b);
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
///
/// `s` must come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn symrec_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
