//! C ABI for the robsel estimator.
//!
//! Every fallible function returns a [`RobselStatus`] and writes its result
//! through an out-pointer. On failure the message is kept per thread and can
//! be read with [`robsel_last_error_message`]. Datasets and fits are opaque
//! handles that must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ndarray::{Array1, Array2};
use robsel::io::ingest_csv;
use robsel::loss::exp_sq_loss;
use robsel::penalty::penalty_value;
use robsel::pipeline::weights_for;
use robsel::propensity::DEFAULT_CLIP_FLOOR;
use robsel::{fit_penalized, select_f, Condition, Dataset, Error, EstimateResult, FitConfig, PenaltyFamily, PenaltySpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobselStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Dimension = 4,
    InvalidData = 5,
    Config = 6,
    Io = 7,
    Csv = 8,
    NonFinite = 9,
    Panic = 10,
}

/// Correction applied by a fit. Passed to the C functions as its integer
/// value; anything else yields `ROBSEL_STATUS_INVALID_ARGUMENT`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobselCondition {
    FullCorrection = 0,
    ErrorOnly = 1,
    MissingOnly = 2,
    NoCorrection = 3,
}

/// Penalty family, passed as its integer value like [`RobselCondition`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobselPenalty {
    Lasso = 0,
    Scad = 1,
    Mcp = 2,
    Atan = 3,
}

fn condition_arg(v: u32) -> Result<Condition, RobselStatus> {
    match v {
        0 => Ok(Condition::FullCorrection),
        1 => Ok(Condition::ErrorOnly),
        2 => Ok(Condition::MissingOnly),
        3 => Ok(Condition::NoCorrection),
        _ => Err(fail(RobselStatus::InvalidArgument, format!("unknown condition {v}"))),
    }
}

fn penalty_arg(v: u32) -> Result<PenaltyFamily, RobselStatus> {
    match v {
        0 => Ok(PenaltyFamily::Lasso),
        1 => Ok(PenaltyFamily::Scad),
        2 => Ok(PenaltyFamily::Mcp),
        3 => Ok(PenaltyFamily::Atan),
        _ => Err(fail(RobselStatus::InvalidArgument, format!("unknown penalty {v}"))),
    }
}

/// Opaque dataset handle.
pub struct RobselDataset(Dataset);

/// Opaque handle to a fitted model.
pub struct RobselFit(EstimateResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> RobselStatus {
    match err {
        Error::Domain(_) => RobselStatus::Domain,
        Error::Dimension(_) => RobselStatus::Dimension,
        Error::InvalidData(_) | Error::NoCompleteObservations => RobselStatus::InvalidData,
        Error::Config(_) | Error::Json(_) => RobselStatus::Config,
        Error::Io { .. } => RobselStatus::Io,
        Error::Csv { .. } => RobselStatus::Csv,
        Error::NonFiniteObjective { .. } => RobselStatus::NonFinite,
    }
}

fn fail(status: RobselStatus, msg: impl Into<String>) -> RobselStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, converting library errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), RobselStatus>) -> RobselStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RobselStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(RobselStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: robsel::Result<T>) -> Result<T, RobselStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), RobselStatus> {
    if p.is_null() {
        Err(fail(RobselStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, RobselStatus> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(RobselStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

/// Message describing the last failure on this thread, or null if the last
/// call succeeded. The pointer stays valid until the next call on this
/// thread.
#[no_mangle]
pub extern "C" fn robsel_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Exponential squared loss of residual `r` at tuning parameter `h`.
///
/// # Safety
/// `out` must be a valid pointer to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn robsel_loss(r: f64, h: f64, out: *mut f64) -> RobselStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = lift(exp_sq_loss(r, h))?;
        Ok(())
    })
}

/// Penalty of `family` at level `f` evaluated at `x`, using the default
/// shape parameters.
///
/// # Safety
/// `out` must be a valid pointer to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn robsel_penalty(family: u32, f: f64, x: f64, out: *mut f64) -> RobselStatus {
    guard(|| {
        non_null(out, "out")?;
        let family = penalty_arg(family)?;
        *out = lift(penalty_value(&PenaltySpec::new(family, f), x))?;
        Ok(())
    })
}

/// Builds a dataset from a response of length `n` and a row-major `n x d`
/// design. NaN cells mark absent covariates.
///
/// # Safety
/// `y` must point to `n` doubles, `x` to `n * d` doubles and `out` to a
/// writable handle pointer.
#[no_mangle]
pub unsafe extern "C" fn robsel_dataset_from_arrays(
    y: *const f64,
    x: *const f64,
    n: usize,
    d: usize,
    out: *mut *mut RobselDataset,
) -> RobselStatus {
    guard(|| {
        non_null(y, "y")?;
        non_null(x, "x")?;
        non_null(out, "out")?;
        let len = n
            .checked_mul(d)
            .ok_or_else(|| fail(RobselStatus::InvalidArgument, "n * d overflows"))?;
        let resp = Array1::from(std::slice::from_raw_parts(y, n).to_vec());
        let design = Array2::from_shape_vec((n, d), std::slice::from_raw_parts(x, len).to_vec())
            .map_err(|e| fail(RobselStatus::Dimension, e.to_string()))?;
        let ds = lift(Dataset::from_raw(resp, design))?;
        *out = Box::into_raw(Box::new(RobselDataset(ds)));
        Ok(())
    })
}

/// Reads a CSV file. `na_token` may be null to accept empty cells and `NA`.
///
/// # Safety
/// `path` and `response` must be NUL-terminated strings; `na_token` must be
/// null or NUL-terminated; `out` must be a writable handle pointer.
#[no_mangle]
pub unsafe extern "C" fn robsel_dataset_from_csv(
    path: *const c_char,
    response: *const c_char,
    na_token: *const c_char,
    out: *mut *mut RobselDataset,
) -> RobselStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let response = str_arg(response, "response")?;
        let na = if na_token.is_null() {
            None
        } else {
            Some(str_arg(na_token, "na_token")?)
        };
        non_null(out, "out")?;
        let ds = lift(ingest_csv(Path::new(path), response, na))?;
        *out = Box::into_raw(Box::new(RobselDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a live handle from a `robsel_dataset_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn robsel_dataset_nrows(ds: *const RobselDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.nrows())
}

/// # Safety
/// `ds` must be null or a live handle from a `robsel_dataset_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn robsel_dataset_ncols(ds: *const RobselDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.ncols())
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn robsel_dataset_free(ds: *mut RobselDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

unsafe fn run_fit(
    ds: *const RobselDataset,
    condition: u32,
    penalty: u32,
    h: f64,
    f: Option<f64>,
    out: *mut *mut RobselFit,
) -> RobselStatus {
    guard(|| {
        non_null(ds, "dataset")?;
        non_null(out, "out")?;
        let data = &(*ds).0;
        let condition = condition_arg(condition)?;
        let penalty = penalty_arg(penalty)?;
        let cfg = FitConfig::default().with_h(h).with_condition(condition);
        lift(cfg.validate())?;
        let weights = lift(weights_for(data, cfg.condition, DEFAULT_CLIP_FLOOR))?;
        let pen = PenaltySpec::new(penalty, f.unwrap_or(0.0)).with_u(cfg.atan_u);
        let est = match f {
            Some(_) => lift(fit_penalized(data, &weights, &pen, &cfg))?,
            None => lift(select_f(data, &weights, &pen, &cfg))?,
        };
        *out = Box::into_raw(Box::new(RobselFit(est)));
        Ok(())
    })
}

/// Fits at a fixed penalty level `f`.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` a writable handle pointer.
#[no_mangle]
pub unsafe extern "C" fn robsel_fit(
    ds: *const RobselDataset,
    condition: u32,
    penalty: u32,
    h: f64,
    f: f64,
    out: *mut *mut RobselFit,
) -> RobselStatus {
    run_fit(ds, condition, penalty, h, Some(f), out)
}

/// Fits over the default penalty grid and keeps the HBIC minimizer.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` a writable handle pointer.
#[no_mangle]
pub unsafe extern "C" fn robsel_select(
    ds: *const RobselDataset,
    condition: u32,
    penalty: u32,
    h: f64,
    out: *mut *mut RobselFit,
) -> RobselStatus {
    run_fit(ds, condition, penalty, h, None, out)
}

/// Number of coefficients in the fit.
///
/// # Safety
/// `fit` must be null or a live fit handle.
#[no_mangle]
pub unsafe extern "C" fn robsel_fit_len(fit: *const RobselFit) -> usize {
    fit.as_ref().map_or(0, |r| r.0.omega_hat.len())
}

/// Copies the coefficients into `buf`, which holds `len` doubles.
///
/// # Safety
/// `fit` must be a live fit handle and `buf` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn robsel_fit_coefficients(fit: *const RobselFit, buf: *mut f64, len: usize) -> RobselStatus {
    guard(|| {
        non_null(fit, "fit")?;
        non_null(buf, "buf")?;
        let coef = (*fit).0.omega_hat.as_slice();
        if len != coef.len() {
            return Err(fail(
                RobselStatus::Dimension,
                format!("buffer holds {len} values, fit has {}", coef.len()),
            ));
        }
        std::ptr::copy_nonoverlapping(coef.as_ptr(), buf, len);
        Ok(())
    })
}

/// Penalty level of the fit; NaN for a null handle.
///
/// # Safety
/// `fit` must be null or a live fit handle.
#[no_mangle]
pub unsafe extern "C" fn robsel_fit_penalty_level(fit: *const RobselFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |r| r.0.f_selected)
}

/// # Safety
/// `fit` must be null or a live fit handle.
#[no_mangle]
pub unsafe extern "C" fn robsel_fit_hbic(fit: *const RobselFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |r| r.0.hbic)
}

/// Weighted data-fit term at the estimate.
///
/// # Safety
/// `fit` must be null or a live fit handle.
#[no_mangle]
pub unsafe extern "C" fn robsel_fit_objective(fit: *const RobselFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |r| r.0.objective)
}

/// # Safety
/// `fit` must be null or a live fit handle.
#[no_mangle]
pub unsafe extern "C" fn robsel_fit_active_count(fit: *const RobselFit) -> usize {
    fit.as_ref().map_or(0, |r| r.0.active_set.len())
}

/// # Safety
/// `fit` must be null or a live fit handle.
#[no_mangle]
pub unsafe extern "C" fn robsel_fit_converged(fit: *const RobselFit) -> bool {
    fit.as_ref().is_some_and(|r| r.0.converged)
}

/// # Safety
/// `fit` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn robsel_fit_free(fit: *mut RobselFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}
