//! C ABI for `s3c`.
//!
//! Handles (`S3cData`, `S3cConfig`, `S3cResult`) are opaque and owned by the
//! caller once returned; release them with the matching `*_free`. Every
//! fallible call returns an [`S3cStatus`]; on failure [`s3c_last_error`]
//! describes the most recent error on the calling thread.
//!
//! Matrices are column-major `double` arrays, one column per point. Indices
//! and labels are zero-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DMatrix;
use s3c::config::{MethodKind, RunConfig};
use s3c::pipeline::{encode_side_info, run_s3c, run_ssc, Mode, StopReason};
use s3c::{ClusterResult, Constraint, DataMatrix, Error, LinkKind};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum S3cStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Parse = 3,
    Numerical = 4,
    InconsistentSideInfo = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

pub const S3C_MUST_LINK: i32 = 0;
pub const S3C_CANNOT_LINK: i32 = 1;

pub const S3C_MODE_HARD: i32 = 0;
pub const S3C_MODE_SOFT: i32 = 1;

pub const S3C_METHOD_SSC: i32 = 0;
pub const S3C_METHOD_S3C: i32 = 1;
pub const S3C_METHOD_CS3C: i32 = 2;

pub const S3C_STOP_THETA: i32 = 0;
pub const S3C_STOP_COEFFICIENTS: i32 = 1;
pub const S3C_STOP_NORM: i32 = 2;
pub const S3C_STOP_KMEANS: i32 = 3;
pub const S3C_STOP_MAX_ITERS: i32 = 4;

/// Column-major data matrix.
pub struct S3cData {
    inner: DataMatrix,
}

/// Run configuration; starts from library defaults.
pub struct S3cConfig {
    inner: RunConfig,
}

pub struct S3cResult {
    inner: ClusterResult,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(S3cStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidInput(_) | Error::Shape { .. } => S3cStatus::InvalidInput,
            Error::Parse { .. } | Error::Io { .. } | Error::Json(_) => S3cStatus::Parse,
            Error::InconsistentSideInfo { .. } => S3cStatus::InconsistentSideInfo,
            _ if e.exit_code() == 3 => S3cStatus::Numerical,
            _ => S3cStatus::InvalidInput,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(S3cStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(S3cStatus::InvalidInput, message.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> S3cStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            S3cStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            S3cStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller guarantees `p` points to `len` readable elements.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: caller guarantees `p` is null or a live handle from this library.
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: as for `deref`, with exclusive access.
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    // SAFETY: `out` is non-null and writable per the caller contract.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn s3c_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn s3c_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies a `rows × cols` column-major matrix; `normalize` scales columns to unit norm.
///
/// # Safety
/// `values` must point to `rows * cols` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s3c_data_new(
    values: *const f64,
    rows: usize,
    cols: usize,
    normalize: bool,
    out: *mut *mut S3cData,
) -> S3cStatus {
    guard(|| {
        let len = rows.checked_mul(cols).ok_or_else(|| invalid("matrix size overflows"))?;
        let v = unsafe { slice(values, len, "values") }?;
        let inner = DataMatrix::new(DMatrix::from_column_slice(rows, cols, v), normalize)?;
        unsafe { store(out, S3cData { inner }) }
    })
}

/// # Safety
/// `data` must be null or a handle from [`s3c_data_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn s3c_data_free(data: *mut S3cData) {
    if !data.is_null() {
        // SAFETY: ownership returns to Rust exactly once.
        drop(unsafe { Box::from_raw(data) });
    }
}

/// Number of points (columns); 0 for a null handle.
///
/// # Safety
/// `data` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn s3c_data_num_points(data: *const S3cData) -> usize {
    unsafe { data.as_ref() }.map_or(0, |d| d.inner.num_points())
}

/// Library defaults: method s3c, hard mode, cluster count unset.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s3c_config_new_default(out: *mut *mut S3cConfig) -> S3cStatus {
    guard(|| unsafe {
        store(
            out,
            S3cConfig {
                inner: RunConfig::from_json("{}")?,
            },
        )
    })
}

/// Parses a flat JSON configuration; unknown keys are rejected.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s3c_config_from_json(json: *const c_char, out: *mut *mut S3cConfig) -> S3cStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        // SAFETY: non-null and NUL-terminated per the caller contract.
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|_| Failure(S3cStatus::Parse, "configuration is not UTF-8".into()))?;
        let inner = RunConfig::from_json(text)?;
        inner.validate()?;
        unsafe { store(out, S3cConfig { inner }) }
    })
}

/// # Safety
/// `config` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn s3c_config_free(config: *mut S3cConfig) {
    if !config.is_null() {
        // SAFETY: ownership returns to Rust exactly once.
        drop(unsafe { Box::from_raw(config) });
    }
}

unsafe fn edit(config: *mut S3cConfig, f: impl FnOnce(&mut RunConfig) -> Result<(), Failure>) -> S3cStatus {
    guard(|| {
        let cfg = unsafe { deref_mut(config, "config") }?;
        let mut next = cfg.inner.clone();
        f(&mut next)?;
        next.materialize();
        next.validate()?;
        cfg.inner = next;
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn s3c_config_set_n_clusters(config: *mut S3cConfig, n_clusters: usize) -> S3cStatus {
    unsafe {
        edit(config, |c| {
            c.n_clusters = Some(n_clusters);
            Ok(())
        })
    }
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn s3c_config_set_lambda0(config: *mut S3cConfig, lambda0: f64) -> S3cStatus {
    unsafe {
        edit(config, |c| {
            c.lambda0 = lambda0;
            Ok(())
        })
    }
}

/// Sets α for the currently selected mode.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn s3c_config_set_alpha(config: *mut S3cConfig, alpha: f64) -> S3cStatus {
    unsafe {
        edit(config, |c| {
            match c.mode {
                Mode::Hard => c.alpha_hard = alpha,
                Mode::Soft => c.alpha_soft = alpha,
            }
            Ok(())
        })
    }
}

/// `S3C_MODE_HARD` or `S3C_MODE_SOFT`.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn s3c_config_set_mode(config: *mut S3cConfig, mode: i32) -> S3cStatus {
    unsafe {
        edit(config, |c| {
            c.mode = match mode {
                S3C_MODE_HARD => Mode::Hard,
                S3C_MODE_SOFT => Mode::Soft,
                m => return Err(invalid(format!("unknown mode {m}"))),
            };
            Ok(())
        })
    }
}

/// `S3C_METHOD_SSC`, `S3C_METHOD_S3C` or `S3C_METHOD_CS3C`.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn s3c_config_set_method(config: *mut S3cConfig, method: i32) -> S3cStatus {
    unsafe {
        edit(config, |c| {
            c.method = match method {
                S3C_METHOD_SSC => MethodKind::Ssc,
                S3C_METHOD_S3C => MethodKind::S3c,
                S3C_METHOD_CS3C => MethodKind::Cs3c,
                m => return Err(invalid(format!("unknown method {m}"))),
            };
            Ok(())
        })
    }
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn s3c_config_set_seed(config: *mut S3cConfig, seed: u64) -> S3cStatus {
    unsafe {
        edit(config, |c| {
            c.seed = seed;
            Ok(())
        })
    }
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn s3c_config_set_t_max(config: *mut S3cConfig, t_max: usize) -> S3cStatus {
    unsafe {
        edit(config, |c| {
            c.t_max = t_max;
            Ok(())
        })
    }
}

/// Clusters the columns of `data`. Constraints are given as parallel arrays
/// of zero-based point indices and link kinds (`S3C_MUST_LINK` /
/// `S3C_CANNOT_LINK`) and require method cs3c.
///
/// # Safety
/// Handles must be live; each constraint array must hold `n_constraints`
/// elements (they may be null when `n_constraints` is 0); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s3c_cluster(
    data: *const S3cData,
    config: *const S3cConfig,
    constraint_i: *const usize,
    constraint_j: *const usize,
    constraint_kind: *const i32,
    n_constraints: usize,
    out: *mut *mut S3cResult,
) -> S3cStatus {
    guard(|| {
        let x = &unsafe { deref(data, "data") }?.inner;
        let cfg = &unsafe { deref(config, "config") }?.inner;
        let ci = unsafe { slice(constraint_i, n_constraints, "constraint_i") }?;
        let cj = unsafe { slice(constraint_j, n_constraints, "constraint_j") }?;
        let ck = unsafe { slice(constraint_kind, n_constraints, "constraint_kind") }?;
        let n_clusters = cfg
            .n_clusters
            .ok_or_else(|| invalid("cluster count not set (s3c_config_set_n_clusters)"))?;
        if n_constraints > 0 && cfg.method != MethodKind::Cs3c {
            return Err(invalid("constraints require method cs3c"));
        }
        let constraints = ci
            .iter()
            .zip(cj)
            .zip(ck)
            .map(|((&i, &j), &k)| {
                let kind = match k {
                    S3C_MUST_LINK => LinkKind::Must,
                    S3C_CANNOT_LINK => LinkKind::Cannot,
                    other => return Err(invalid(format!("unknown link kind {other}"))),
                };
                Ok(Constraint::new(i, j, kind))
            })
            .collect::<Result<Vec<_>, Failure>>()?;

        let s3c_cfg = cfg.s3c_config(cfg.mode, n_clusters);
        let result = match cfg.method {
            MethodKind::Ssc => run_ssc(x, &s3c_cfg),
            MethodKind::S3c => run_s3c(x, &s3c_cfg, None),
            MethodKind::Cs3c => {
                let psi = encode_side_info(&constraints, x.num_points())?;
                run_s3c(x, &s3c_cfg, Some(&psi))
            }
        }
        .map_err(Error::from)?;
        unsafe { store(out, S3cResult { inner: result }) }
    })
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn s3c_result_free(result: *mut S3cResult) {
    if !result.is_null() {
        // SAFETY: ownership returns to Rust exactly once.
        drop(unsafe { Box::from_raw(result) });
    }
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn s3c_result_num_points(result: *const S3cResult) -> usize {
    unsafe { result.as_ref() }.map_or(0, |r| r.inner.labels.len())
}

/// Outer iterations performed; 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn s3c_result_outer_iterations(result: *const S3cResult) -> usize {
    unsafe { result.as_ref() }.map_or(0, |r| r.inner.history.len())
}

/// One of the `S3C_STOP_*` constants; -1 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn s3c_result_stop_reason(result: *const S3cResult) -> i32 {
    unsafe { result.as_ref() }.map_or(-1, |r| match r.inner.stop_reason {
        StopReason::ThetaConverged => S3C_STOP_THETA,
        StopReason::CConverged => S3C_STOP_COEFFICIENTS,
        StopReason::NormConverged => S3C_STOP_NORM,
        StopReason::KmeansConverged => S3C_STOP_KMEANS,
        StopReason::MaxIters => S3C_STOP_MAX_ITERS,
    })
}

/// Writes the zero-based labels into `out`, which must hold `len ≥ N` entries.
///
/// # Safety
/// `result` must be live; `out` must point to `len` writable elements.
#[no_mangle]
pub unsafe extern "C" fn s3c_result_labels(result: *const S3cResult, out: *mut usize, len: usize) -> S3cStatus {
    guard(|| {
        let labels = unsafe { deref(result, "result") }?.inner.labels.labels();
        copy_out(labels, out, len)
    })
}

/// Writes the N×N coefficient matrix column-major into `out` (`len ≥ N²`).
///
/// # Safety
/// `result` must be live; `out` must point to `len` writable elements.
#[no_mangle]
pub unsafe extern "C" fn s3c_result_coefficients(result: *const S3cResult, out: *mut f64, len: usize) -> S3cStatus {
    guard(|| {
        let c = unsafe { deref(result, "result") }?.inner.coefficients.values();
        copy_out(c.as_slice(), out, len)
    })
}

fn copy_out<T: Copy>(src: &[T], out: *mut T, len: usize) -> Result<(), Failure> {
    if len < src.len() {
        return Err(Failure(
            S3cStatus::BufferTooSmall,
            format!("buffer holds {len} elements, {} needed", src.len()),
        ));
    }
    if src.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("out"));
    }
    // SAFETY: `out` has room for `len ≥ src.len()` elements and does not
    // alias library-owned memory.
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), out, src.len()) };
    Ok(())
}

/// Fraction of points misassigned under the best label matching. Labels are
/// zero-based and below `n_clusters`.
///
/// # Safety
/// `truth` and `pred` must point to `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s3c_clustering_error(
    truth: *const usize,
    pred: *const usize,
    n: usize,
    n_clusters: usize,
    out: *mut f64,
) -> S3cStatus {
    guard(|| {
        let t = unsafe { slice(truth, n, "truth") }?;
        let p = unsafe { slice(pred, n, "pred") }?;
        let err = s3c::metrics::clustering_error(t, p, n_clusters)?;
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: non-null and writable per the caller contract.
        unsafe { *out = err };
        Ok(())
    })
}
