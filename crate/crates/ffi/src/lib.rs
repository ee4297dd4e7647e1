//! C ABI for glmsel.
//!
//! Datasets and reports are opaque heap handles owned by the caller and
//! released with the matching `_free` function. Every fallible call returns a
//! status code; on failure the message is available from
//! [`glmsel_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use glmsel::cli::{cmd_infer, InferConfig};
use glmsel::glm::Dataset;
use glmsel::nalgebra::{DMatrix, DVector};
use glmsel::report::{InferenceReport, Method};
use glmsel::Error;

pub const GLMSEL_OK: i32 = 0;
/// Null pointer, bad length or invalid UTF-8.
pub const GLMSEL_INVALID_ARGUMENT: i32 = 1;
pub const GLMSEL_CONFIG_ERROR: i32 = 2;
pub const GLMSEL_DATA_ERROR: i32 = 3;
pub const GLMSEL_EMPTY_MODEL: i32 = 4;
pub const GLMSEL_NUMERIC_ERROR: i32 = 5;
/// A Rust panic was caught at the boundary.
pub const GLMSEL_INTERNAL_ERROR: i32 = 6;

pub const GLMSEL_METHOD_PPL: i32 = 0;
pub const GLMSEL_METHOD_POLYHEDRAL: i32 = 1;
pub const GLMSEL_METHOD_NAIVE: i32 = 2;

/// Observations and covariates.
pub struct GlmselDataset(Dataset);

/// Result of an inference run.
pub struct GlmselReport(InferenceReport);

/// One coefficient under one method. Missing values are NaN; infinite CI
/// endpoints are IEEE infinities.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GlmselCoefficient {
    /// 1-based column index.
    pub index: usize,
    /// One of the `GLMSEL_METHOD_*` constants.
    pub method: i32,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub p_value: f64,
    /// 1 when inference succeeded, 0 when it failed for this entry.
    pub ok: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status(e: &Error) -> i32 {
    set_error(&e.to_string());
    e.exit_code()
}

fn invalid(msg: &str) -> i32 {
    set_error(msg);
    GLMSEL_INVALID_ARGUMENT
}

fn guard(f: impl FnOnce() -> i32) -> i32 {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| {
        set_error("internal error");
        GLMSEL_INTERNAL_ERROR
    })
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn glmsel_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a dataset from a row-major `n × p` covariate array and `n`
/// responses. Both arrays are copied.
///
/// # Safety
/// `x` must point to `n * p` doubles (may be null when `p == 0`), `y` to `n`
/// doubles, and `out` to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn glmsel_dataset_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut GlmselDataset,
) -> i32 {
    guard(|| {
        if out.is_null() || y.is_null() || (x.is_null() && p > 0) {
            return invalid("null pointer");
        }
        let Some(len) = n.checked_mul(p) else {
            return invalid("n * p overflows");
        };
        let xs = if p == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(x, len)
        };
        let ys = std::slice::from_raw_parts(y, n);
        let xm = DMatrix::from_row_slice(n, p, xs);
        match Dataset::new(xm, DVector::from_column_slice(ys)) {
            Ok(d) => {
                *out = Box::into_raw(Box::new(GlmselDataset(d)));
                GLMSEL_OK
            }
            Err(e) => status(&e),
        }
    })
}

/// # Safety
/// `ds` must be null or a handle from [`glmsel_dataset_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn glmsel_dataset_free(ds: *mut GlmselDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Runs selection and inference. `config` is the same flat TOML accepted by
/// the command line (`family` required; `response` and `one_hot` ignored).
///
/// # Safety
/// `ds` must be a live dataset handle, `config` a NUL-terminated string and
/// `out` writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn glmsel_infer(
    ds: *const GlmselDataset,
    config: *const c_char,
    out: *mut *mut GlmselReport,
) -> i32 {
    guard(|| {
        if ds.is_null() || config.is_null() || out.is_null() {
            return invalid("null pointer");
        }
        let Ok(text) = CStr::from_ptr(config).to_str() else {
            return invalid("config is not valid UTF-8");
        };
        let result = InferConfig::from_toml_str(text).and_then(|cfg| cmd_infer(&(*ds).0, &cfg));
        match result {
            Ok(o) => {
                *out = Box::into_raw(Box::new(GlmselReport(o.report)));
                GLMSEL_OK
            }
            Err(e) => status(&e),
        }
    })
}

/// Number of coefficient entries (selected covariates × methods).
///
/// # Safety
/// `r` must be a live report handle.
#[no_mangle]
pub unsafe extern "C" fn glmsel_report_len(r: *const GlmselReport) -> usize {
    r.as_ref().map_or(0, |r| r.0.coefficients.len())
}

/// Penalty used for selection (sum-of-squares scale), NaN for a null handle.
///
/// # Safety
/// `r` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn glmsel_report_lambda(r: *const GlmselReport) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.0.lambda.value)
}

/// # Safety
/// `r` must be a live report handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn glmsel_report_entry(
    r: *const GlmselReport,
    i: usize,
    out: *mut GlmselCoefficient,
) -> i32 {
    guard(|| {
        let (Some(r), false) = (r.as_ref(), out.is_null()) else {
            return invalid("null pointer");
        };
        let Some(c) = r.0.coefficients.get(i) else {
            return invalid("entry index out of range");
        };
        *out = GlmselCoefficient {
            index: c.index,
            method: match c.method {
                Method::Ppl => GLMSEL_METHOD_PPL,
                Method::Polyhedral => GLMSEL_METHOD_POLYHEDRAL,
                Method::Naive => GLMSEL_METHOD_NAIVE,
            },
            estimate: c.estimate,
            ci_lo: c.ci_lo.unwrap_or(f64::NAN),
            ci_hi: c.ci_hi.unwrap_or(f64::NAN),
            p_value: c.p_value.unwrap_or(f64::NAN),
            ok: i32::from(c.error.is_none()),
        };
        GLMSEL_OK
    })
}

/// Full report as JSON; release with [`glmsel_string_free`]. Null on failure.
///
/// # Safety
/// `r` must be a live report handle.
#[no_mangle]
pub unsafe extern "C" fn glmsel_report_json(r: *const GlmselReport) -> *mut c_char {
    let Some(r) = r.as_ref() else {
        invalid("null pointer");
        return ptr::null_mut();
    };
    match serde_json::to_string(&r.0) {
        Ok(s) => CString::new(s).map_or(ptr::null_mut(), CString::into_raw),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn glmsel_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `r` must be null or a report handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn glmsel_report_free(r: *mut GlmselReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
