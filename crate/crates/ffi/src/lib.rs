//! C ABI over the chart-reward engine.
//!
//! Documents and configs cross the boundary as opaque handles created and
//! destroyed by this library. Every fallible call returns a [`CrStatus`];
//! on failure [`cr_last_error_message`] describes the problem for the
//! calling thread. Strings returned to the caller must be released with
//! [`cr_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chart_reward::{
    format_reward, group_advantages, layout_metric, parse_chart_document, rendering_reward,
    serialize_chart_document, text_metric, total_reward, ChartDocument, EngineConfig, Error,
    RewardConfig,
};

/// Result codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Usage = 5,
    Config = 6,
    Infrastructure = 7,
    Io = 8,
    Panic = 9,
}

/// Opaque parsed Chart JSON document.
pub struct CrChartDocument(ChartDocument);

/// Opaque reward configuration.
pub struct CrRewardConfig(RewardConfig);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let msg = CString::new(message.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(err: Error) -> CrStatus {
    let status = match &err {
        Error::Parse { .. } => CrStatus::Parse,
        Error::Validation { .. } => CrStatus::Validation,
        Error::Usage(_) => CrStatus::Usage,
        Error::Config(_) => CrStatus::Config,
        Error::Infrastructure(_) => CrStatus::Infrastructure,
        Error::Io { .. } => CrStatus::Io,
    };
    set_error(err.to_string());
    status
}

fn null(what: &str) -> CrStatus {
    set_error(format!("{what} is null"));
    CrStatus::NullPointer
}

fn guarded(f: impl FnOnce() -> CrStatus) -> CrStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| {
        set_error("panic inside chart-reward");
        CrStatus::Panic
    })
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, CrStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        CrStatus::InvalidUtf8
    })
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .map_or(ptr::null_mut(), CString::into_raw)
}

/// Message for the last failed call on this thread. Valid until the next
/// call into this library from the same thread; never null.
#[no_mangle]
pub extern "C" fn cr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse and validate Chart JSON bytes.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` to writable storage
/// for one pointer.
#[no_mangle]
pub unsafe extern "C" fn cr_chart_document_parse(
    data: *const u8,
    len: usize,
    out: *mut *mut CrChartDocument,
) -> CrStatus {
    guarded(|| {
        if data.is_null() || out.is_null() {
            return null("data or out");
        }
        *out = ptr::null_mut();
        let bytes = std::slice::from_raw_parts(data, len);
        match parse_chart_document(bytes) {
            Ok(doc) => {
                *out = Box::into_raw(Box::new(CrChartDocument(doc)));
                CrStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Serialize a document to canonical Chart JSON. Free the result with
/// [`cr_string_free`].
///
/// # Safety
/// `doc` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cr_chart_document_serialize(
    doc: *const CrChartDocument,
    out: *mut *mut c_char,
) -> CrStatus {
    guarded(|| {
        if doc.is_null() || out.is_null() {
            return null("doc or out");
        }
        let bytes = serialize_chart_document(&(*doc).0);
        *out = into_c_string(String::from_utf8_lossy(&bytes).into_owned());
        CrStatus::Ok
    })
}

/// Number of graphical and text objects in a document.
///
/// # Safety
/// `doc` must be a live handle; the count pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn cr_chart_document_counts(
    doc: *const CrChartDocument,
    graphical: *mut usize,
    texts: *mut usize,
) -> CrStatus {
    if doc.is_null() {
        return null("doc");
    }
    let doc = &(*doc).0;
    if !graphical.is_null() {
        *graphical = doc.graphical.len();
    }
    if !texts.is_null() {
        *texts = doc.texts.len();
    }
    CrStatus::Ok
}

/// # Safety
/// `doc` must be null or a handle from [`cr_chart_document_parse`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn cr_chart_document_free(doc: *mut CrChartDocument) {
    if !doc.is_null() {
        drop(Box::from_raw(doc));
    }
}

/// Default reward configuration.
#[no_mangle]
pub extern "C" fn cr_config_new_default() -> *mut CrRewardConfig {
    Box::into_raw(Box::new(CrRewardConfig(RewardConfig::default())))
}

/// Reward configuration from a JSON config file body.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cr_config_from_json(
    json: *const c_char,
    out: *mut *mut CrRewardConfig,
) -> CrStatus {
    guarded(|| {
        if out.is_null() {
            return null("out");
        }
        *out = ptr::null_mut();
        let text = match str_arg(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match EngineConfig::from_json(text) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(CrRewardConfig(cfg.reward)));
                CrStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `cfg` must be null or a live config handle.
#[no_mangle]
pub unsafe extern "C" fn cr_config_free(cfg: *mut CrRewardConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

unsafe fn metric(
    pred: *const CrChartDocument,
    gt: *const CrChartDocument,
    cfg: *const CrRewardConfig,
    out: *mut f64,
    f: impl FnOnce(&ChartDocument, &ChartDocument, &RewardConfig) -> chart_reward::Result<f64>,
) -> CrStatus {
    guarded(|| {
        if pred.is_null() || gt.is_null() || cfg.is_null() || out.is_null() {
            return null("pred, gt, cfg or out");
        }
        match f(&(*pred).0, &(*gt).0, &(*cfg).0) {
            Ok(v) => {
                *out = v;
                CrStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Layout metric L_R of `pred` against `gt`, in `[0, 1]`.
///
/// # Safety
/// All handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cr_layout_metric(
    pred: *const CrChartDocument,
    gt: *const CrChartDocument,
    cfg: *const CrRewardConfig,
    out: *mut f64,
) -> CrStatus {
    metric(pred, gt, cfg, out, layout_metric)
}

/// Text metric T_R of `pred` against `gt`, in `[0, 1]`.
///
/// # Safety
/// All handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cr_text_metric(
    pred: *const CrChartDocument,
    gt: *const CrChartDocument,
    cfg: *const CrRewardConfig,
    out: *mut f64,
) -> CrStatus {
    metric(pred, gt, cfg, out, text_metric)
}

/// Rendering reward, zero unless `exec` is 1.
///
/// # Safety
/// All handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cr_rendering_reward(
    pred: *const CrChartDocument,
    gt: *const CrChartDocument,
    exec: u8,
    cfg: *const CrRewardConfig,
    out: *mut f64,
) -> CrStatus {
    metric(pred, gt, cfg, out, |p, g, c| rendering_reward(p, g, u8::from(exec != 0), c))
}

/// Format reward of a raw response. On score 1, `*code` receives the
/// extracted code (free with [`cr_string_free`]); otherwise it is set to null.
///
/// # Safety
/// `response` must be NUL-terminated; `score` and `code` writable.
#[no_mangle]
pub unsafe extern "C" fn cr_format_reward(
    response: *const c_char,
    score: *mut u8,
    code: *mut *mut c_char,
) -> CrStatus {
    guarded(|| {
        if score.is_null() || code.is_null() {
            return null("score or code");
        }
        let text = match str_arg(response, "response") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let (s, extracted) = format_reward(text);
        *score = s;
        *code = extracted.map_or(ptr::null_mut(), into_c_string);
        CrStatus::Ok
    })
}

#[no_mangle]
pub extern "C" fn cr_total_reward(format: u8, render: f64) -> f64 {
    total_reward(u8::from(format != 0), render)
}

/// Z-score `n` rewards into `out` (room for `n` doubles).
///
/// # Safety
/// `rewards` must hold `n` doubles, `out` must have room for `n`, `cfg` live.
#[no_mangle]
pub unsafe extern "C" fn cr_group_advantages(
    rewards: *const f64,
    n: usize,
    cfg: *const CrRewardConfig,
    out: *mut f64,
) -> CrStatus {
    guarded(|| {
        if rewards.is_null() || cfg.is_null() || out.is_null() {
            return null("rewards, cfg or out");
        }
        let rewards = std::slice::from_raw_parts(rewards, n);
        match group_advantages(rewards, &(*cfg).0) {
            Ok(group) => {
                std::slice::from_raw_parts_mut(out, n).copy_from_slice(&group.advantages);
                CrStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
