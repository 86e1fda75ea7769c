//! C ABI for collusion-core.
//!
//! Every fallible function returns a [`CollusionStatus`] and writes results
//! through out-pointers. On failure a message is kept per thread and can be
//! read with [`collusion_last_error`]. Objects are opaque handles created by
//! a `*_new`/`*_load`/`*_fit` function and released with the matching
//! `*_free`; freeing NULL is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use collusion_core::analytics::{giant_component, network_stats, ChannelGraph};
use collusion_core::anomaly::{detect_peaks, fit_error_model, AnomalyDetector, ErrorModel, PeakParams, Ridge, TimeSeries};
use collusion_core::classifiers::{score_one_class, DacModel, OneClassModel};
use collusion_core::comments::embed::{provider_from_spec, EmbeddingProvider};
use collusion_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollusionStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Io = 4,
    Parse = 5,
    InsufficientData = 6,
    Numerical = 7,
    BufferTooSmall = 8,
    Internal = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Fail {
    status: CollusionStatus,
    message: String,
}

impl Fail {
    fn new(status: CollusionStatus, message: impl Into<String>) -> Self {
        Fail {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } | Error::Provider { .. } => CollusionStatus::Io,
            Error::InvalidInput(_) | Error::Config(_) => CollusionStatus::InvalidArgument,
            Error::DimensionMismatch { .. } => CollusionStatus::DimensionMismatch,
            Error::InsufficientData(_) => CollusionStatus::InsufficientData,
            Error::Degenerate(_) | Error::Numerical(_) => CollusionStatus::Numerical,
            Error::Serde(_) => CollusionStatus::Parse,
            Error::LabelLeak(_) => CollusionStatus::Internal,
        };
        Fail::new(status, e.to_string())
    }
}

impl From<serde_json::Error> for Fail {
    fn from(e: serde_json::Error) -> Self {
        Fail::new(CollusionStatus::Parse, e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CollusionStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CollusionStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(_) => {
            set_last_error("internal panic");
            CollusionStatus::Internal
        }
    }
}

fn null(what: &str) -> Fail {
    Fail::new(CollusionStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::new(CollusionStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn check_dim(expected: usize, got: usize) -> Result<(), Fail> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got }.into());
    }
    Ok(())
}

fn read_file(path: &str) -> Result<Vec<u8>, Fail> {
    std::fs::read(path).map_err(|e| {
        Error::Io {
            path: Path::new(path).to_path_buf(),
            source: e,
        }
        .into()
    })
}

unsafe fn free_box<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version, NUL-terminated, static.
#[no_mangle]
pub extern "C" fn collusion_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread. Valid until the next failing
/// call on the same thread; empty if nothing failed yet.
#[no_mangle]
pub extern "C" fn collusion_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Sentence embedder (`hash`, `hash:DIM`, `file:PATH`, `remote:URL`).
pub struct CollusionEmbedder {
    inner: Box<dyn EmbeddingProvider>,
}

/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn collusion_embedder_new(
    spec: *const c_char,
    seed: u64,
    out: *mut *mut CollusionEmbedder,
) -> CollusionStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = provider_from_spec(string(spec, "spec")?, seed)?;
        out.write(Box::into_raw(Box::new(CollusionEmbedder { inner })));
        Ok(())
    })
}

/// # Safety
/// `handle` must come from [`collusion_embedder_new`].
#[no_mangle]
pub unsafe extern "C" fn collusion_embedder_dim(handle: *const CollusionEmbedder, out: *mut usize) -> CollusionStatus {
    guard(|| put(out, deref(handle, "handle")?.inner.dim(), "out"))
}

/// Embed one text into `out[0..len]`; `len` must equal the embedder's dim.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn collusion_embedder_embed(
    handle: *const CollusionEmbedder,
    text: *const c_char,
    out: *mut f64,
    len: usize,
) -> CollusionStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        let text = string(text, "text")?;
        check_dim(h.inner.dim(), len)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let v = h.inner.embed(&[text])?.pop().unwrap_or_default();
        check_dim(len, v.len())?;
        ptr::copy_nonoverlapping(v.as_ptr(), out, len);
        Ok(())
    })
}

/// # Safety
/// `handle` must come from [`collusion_embedder_new`] and not be used after.
#[no_mangle]
pub unsafe extern "C" fn collusion_embedder_free(handle: *mut CollusionEmbedder) {
    free_box(handle);
}

/// Gaussian over prediction-error vectors.
pub struct CollusionErrorModel {
    inner: ErrorModel,
}

/// Fit on `n` row-major error vectors of length `dim`.
///
/// # Safety
/// `errors` must hold `n * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn collusion_error_model_fit(
    errors: *const f64,
    n: usize,
    dim: usize,
    out: *mut *mut CollusionErrorModel,
) -> CollusionStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if dim == 0 {
            return Err(Fail::new(CollusionStatus::InvalidArgument, "dim must be positive"));
        }
        let flat = slice(errors, n * dim, "errors")?;
        let rows: Vec<Vec<f64>> = flat.chunks(dim).map(<[f64]>::to_vec).collect();
        let inner = fit_error_model(&rows, Ridge::Auto)?;
        out.write(Box::into_raw(Box::new(CollusionErrorModel { inner })));
        Ok(())
    })
}

/// Anomaly score of one error vector.
///
/// # Safety
/// `error` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn collusion_error_model_score(
    handle: *const CollusionErrorModel,
    error: *const f64,
    dim: usize,
    out: *mut f64,
) -> CollusionStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        let e = slice(error, dim, "error")?;
        put(out, h.inner.score(e)?, "out")
    })
}

/// # Safety
/// `handle` must come from [`collusion_error_model_fit`].
#[no_mangle]
pub unsafe extern "C" fn collusion_error_model_free(handle: *mut CollusionErrorModel) {
    free_box(handle);
}

/// One detected peak. Positions are fractional sample indices.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollusionPeak {
    pub apex: usize,
    pub height: f64,
    pub prominence: f64,
    pub left: f64,
    pub right: f64,
    pub width: f64,
    pub area: f64,
}

fn write_peaks(
    peaks: &[collusion_core::anomaly::Peak],
    out: *mut CollusionPeak,
    cap: usize,
    count: *mut usize,
) -> Result<(), Fail> {
    unsafe { put(count, peaks.len(), "count")? };
    if peaks.len() > cap {
        return Err(Fail::new(
            CollusionStatus::BufferTooSmall,
            format!("{} peaks do not fit in {cap}", peaks.len()),
        ));
    }
    if !peaks.is_empty() && out.is_null() {
        return Err(null("out"));
    }
    for (i, p) in peaks.iter().enumerate() {
        let c = CollusionPeak {
            apex: p.apex,
            height: p.height,
            prominence: p.prominence,
            left: p.left,
            right: p.right,
            width: p.width,
            area: p.area,
        };
        unsafe { out.add(i).write(c) };
    }
    Ok(())
}

/// Peaks of `scores`. NaN thresholds mean "no threshold". `*count` always
/// receives the number of peaks; if it exceeds `cap` nothing is written and
/// BUFFER_TOO_SMALL is returned.
///
/// # Safety
/// `scores` must hold `n` doubles and `out` room for `cap` peaks.
#[no_mangle]
pub unsafe extern "C" fn collusion_detect_peaks(
    scores: *const f64,
    n: usize,
    min_height: f64,
    min_prominence: f64,
    rel_height: f64,
    out: *mut CollusionPeak,
    cap: usize,
    count: *mut usize,
) -> CollusionStatus {
    guard(|| {
        let x = slice(scores, n, "scores")?;
        let opt = |v: f64| (!v.is_nan()).then_some(v);
        let params = PeakParams::new(opt(min_height), opt(min_prominence), rel_height)?;
        write_peaks(&detect_peaks(x, &params), out, cap, count)
    })
}

/// Trained anomaly detector (GRU predictor, error model, peak thresholds).
pub struct CollusionDetector {
    inner: AnomalyDetector,
}

/// Load a detector written by `collusion train-anomaly`.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn collusion_detector_load(path: *const c_char, out: *mut *mut CollusionDetector) -> CollusionStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner: AnomalyDetector = serde_json::from_slice(&read_file(string(path, "path")?)?)?;
        out.write(Box::into_raw(Box::new(CollusionDetector { inner })));
        Ok(())
    })
}

/// Score a per-bin count series (binned as the detector was trained).
/// Scores align with positions `first_position ..`. `*written` receives the
/// score count even when `cap` is too small.
///
/// # Safety
/// `counts` must hold `n` doubles and `scores` room for `cap`.
#[no_mangle]
pub unsafe extern "C" fn collusion_detector_score(
    handle: *const CollusionDetector,
    counts: *const f64,
    n: usize,
    scores: *mut f64,
    cap: usize,
    written: *mut usize,
    first_position: *mut usize,
) -> CollusionStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        let values = slice(counts, n, "counts")?.to_vec();
        let cfg = &h.inner.config;
        let series = TimeSeries::new("ffi", cfg.bin_width, 0, cfg.mode, 1, values)?;
        let scored = h.inner.score(&series)?;
        put(written, scored.scores.len(), "written")?;
        put(first_position, scored.first_position, "first_position")?;
        if scored.scores.len() > cap {
            return Err(Fail::new(CollusionStatus::BufferTooSmall, "scores buffer too small"));
        }
        if !scored.scores.is_empty() {
            if scores.is_null() {
                return Err(null("scores"));
            }
            ptr::copy_nonoverlapping(scored.scores.as_ptr(), scores, scored.scores.len());
        }
        Ok(())
    })
}

/// Peaks of a count series under the detector's calibrated thresholds, in
/// series positions.
///
/// # Safety
/// As [`collusion_detector_score`].
#[no_mangle]
pub unsafe extern "C" fn collusion_detector_peaks(
    handle: *const CollusionDetector,
    counts: *const f64,
    n: usize,
    out: *mut CollusionPeak,
    cap: usize,
    count: *mut usize,
) -> CollusionStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        let values = slice(counts, n, "counts")?.to_vec();
        let cfg = &h.inner.config;
        let series = TimeSeries::new("ffi", cfg.bin_width, 0, cfg.mode, 1, values)?;
        let scored = h.inner.score(&series)?;
        write_peaks(&h.inner.peaks(&scored), out, cap, count)
    })
}

/// # Safety
/// `handle` must come from [`collusion_detector_load`].
#[no_mangle]
pub unsafe extern "C" fn collusion_detector_free(handle: *mut CollusionDetector) {
    free_box(handle);
}

/// Trained denoising-autoencoder classifier.
pub struct CollusionDac {
    inner: DacModel,
}

/// Load a model written by `collusion train --task comments`.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn collusion_dac_load(path: *const c_char, out: *mut *mut CollusionDac) -> CollusionStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner: DacModel = serde_json::from_slice(&read_file(string(path, "path")?)?)?;
        out.write(Box::into_raw(Box::new(CollusionDac { inner })));
        Ok(())
    })
}

/// # Safety
/// `handle` must come from [`collusion_dac_load`].
#[no_mangle]
pub unsafe extern "C" fn collusion_dac_input_dim(handle: *const CollusionDac, out: *mut usize) -> CollusionStatus {
    guard(|| put(out, deref(handle, "handle")?.inner.input_dim(), "out"))
}

/// Class probabilities `[collusive, other]` of a raw feature vector.
///
/// # Safety
/// `features` must hold `dim` doubles and `probs` room for 2.
#[no_mangle]
pub unsafe extern "C" fn collusion_dac_predict(
    handle: *const CollusionDac,
    features: *const f64,
    dim: usize,
    probs: *mut f64,
) -> CollusionStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        check_dim(h.inner.input_dim(), dim)?;
        let p = h.inner.predict(slice(features, dim, "features")?)?;
        if probs.is_null() {
            return Err(null("probs"));
        }
        ptr::copy_nonoverlapping(p.as_ptr(), probs, 2);
        Ok(())
    })
}

/// # Safety
/// `handle` must come from [`collusion_dac_load`].
#[no_mangle]
pub unsafe extern "C" fn collusion_dac_free(handle: *mut CollusionDac) {
    free_box(handle);
}

/// Trained one-class model (ocsvm, iforest, mcd or lof).
pub struct CollusionOneClass {
    inner: OneClassModel,
}

/// Load a one-class model. The file holds either one model or an array of
/// models (as written by `collusion train`), in which case `index` picks one.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn collusion_one_class_load(
    path: *const c_char,
    index: usize,
    out: *mut *mut CollusionOneClass,
) -> CollusionStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let value: serde_json::Value = serde_json::from_slice(&read_file(string(path, "path")?)?)?;
        let value = match value {
            serde_json::Value::Array(mut items) => {
                if index >= items.len() {
                    return Err(Fail::new(
                        CollusionStatus::InvalidArgument,
                        format!("index {index} out of {} models", items.len()),
                    ));
                }
                items.swap_remove(index)
            }
            v => v,
        };
        let inner: OneClassModel = serde_json::from_value(value)?;
        out.write(Box::into_raw(Box::new(CollusionOneClass { inner })));
        Ok(())
    })
}

/// Score (higher is more inlier-like) and inlier decision.
///
/// # Safety
/// `features` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn collusion_one_class_score(
    handle: *const CollusionOneClass,
    features: *const f64,
    dim: usize,
    score: *mut f64,
    is_inlier: *mut bool,
) -> CollusionStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        check_dim(h.inner.dim(), dim)?;
        let s = score_one_class(&h.inner, slice(features, dim, "features")?)?;
        put(score, s.score, "score")?;
        put(is_inlier, s.is_inlier, "is_inlier")
    })
}

/// # Safety
/// `handle` must come from [`collusion_one_class_load`].
#[no_mangle]
pub unsafe extern "C" fn collusion_one_class_free(handle: *mut CollusionOneClass) {
    free_box(handle);
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollusionNetworkStats {
    pub nodes: usize,
    pub edges: usize,
    pub average_degree: f64,
    pub diameter: usize,
    pub average_path_length: f64,
    pub density: f64,
    pub clustering: f64,
}

/// Statistics of the giant component of an undirected graph given as an
/// edge list, one `a b` pair per line.
///
/// # Safety
/// `edge_list` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn collusion_network_stats(
    edge_list: *const c_char,
    out: *mut CollusionNetworkStats,
) -> CollusionStatus {
    guard(|| {
        let graph = ChannelGraph::from_edge_list(string(edge_list, "edge_list")?)?;
        let s = network_stats(&giant_component(&graph)?)?;
        put(
            out,
            CollusionNetworkStats {
                nodes: s.nodes,
                edges: s.edges,
                average_degree: s.average_degree,
                diameter: s.diameter,
                average_path_length: s.average_path_length,
                density: s.density,
                clustering: s.clustering,
            },
            "out",
        )
    })
}
