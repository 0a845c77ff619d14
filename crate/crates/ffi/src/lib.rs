//! C interface to `hawkes-core`.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every function returns a
//! [`HawkesStatus`]; on failure [`hawkes_last_error_message`] describes the
//! error on the calling thread. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use hawkes_core::estimate::{fit_bcb, fit_mle, FitResult, ModelSpec};
use hawkes_core::gof::ks_test_uniform;
use hawkes_core::likelihood::log_likelihood;
use hawkes_core::simulate::simulate;
use hawkes_core::{
    ConstantBackground, Error, EventSequence, ExponentialKernel, ObservationWindow, PiecewiseLinearBackground,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HawkesStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Io = 4,
    Convergence = 5,
    Numerical = 6,
    Panic = 7,
}

/// Background family for [`hawkes_fit`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HawkesModel {
    Const = 0,
    /// Piecewise linear with regularly spaced knots.
    PiecewiseLinear = 1,
    /// Spline background by empirical Bayes.
    Bcb = 2,
}

/// An event sequence with its observation window.
pub struct HawkesEvents {
    inner: EventSequence,
}

/// A fitted model.
pub struct HawkesFit {
    inner: FitResult,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let clean = message.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).unwrap_or_default());
}

fn status_of(err: &Error) -> HawkesStatus {
    match err {
        Error::Domain(_) => HawkesStatus::Domain,
        Error::InvalidInput(_)
        | Error::Config(_)
        | Error::Parse { .. }
        | Error::UnstableKernel(_)
        | Error::UnboundedBackground(_)
        | Error::TooFewSamples { .. } => HawkesStatus::InvalidArgument,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => HawkesStatus::Io,
        Error::NonConvergence { .. } => HawkesStatus::Convergence,
        Error::NotPositiveDefinite(_) | Error::Overflow { .. } => HawkesStatus::Numerical,
    }
}

struct Failure(HawkesStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(HawkesStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HawkesStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HawkesStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {message}"));
            HawkesStatus::Panic
        }
    }
}

unsafe fn slice_arg<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(data, len))
}

unsafe fn kernel_arg(alphas: *const f64, betas: *const f64, order: usize) -> Result<ExponentialKernel, Failure> {
    let a = slice_arg(alphas, order, "alphas")?;
    let b = slice_arg(betas, order, "betas")?;
    Ok(ExponentialKernel::new(a.to_vec(), b.to_vec())?)
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn hawkes_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds an event sequence from `n` sorted times inside `[start, end]`.
///
/// # Safety
/// `times` must point to `n` readable doubles (or be null when `n == 0`);
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hawkes_events_new(
    times: *const f64,
    n: usize,
    start: f64,
    end: f64,
    out: *mut *mut HawkesEvents,
) -> HawkesStatus {
    guard(|| {
        let t = slice_arg(times, n, "times")?;
        let seq = EventSequence::new(t.to_vec(), ObservationWindow::new(start, end)?)?;
        write_out(out, Box::into_raw(Box::new(HawkesEvents { inner: seq })))
    })
}

/// Reads an events CSV (`# start=`, `# end=` header, one time per line).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hawkes_events_read_csv(path: *const c_char, out: *mut *mut HawkesEvents) -> HawkesStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure(HawkesStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let seq = EventSequence::from_path(path)?;
        write_out(out, Box::into_raw(Box::new(HawkesEvents { inner: seq })))
    })
}

/// Number of events; 0 for a null handle.
///
/// # Safety
/// `events` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hawkes_events_len(events: *const HawkesEvents) -> usize {
    events.as_ref().map_or(0, |e| e.inner.len())
}

/// Copies up to `capacity` event times into `buffer` and returns the total
/// number of events.
///
/// # Safety
/// `events` must be null or a live handle; `buffer` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn hawkes_events_copy_times(
    events: *const HawkesEvents,
    buffer: *mut f64,
    capacity: usize,
) -> usize {
    let Some(e) = events.as_ref() else { return 0 };
    let times = e.inner.times();
    if !buffer.is_null() {
        let k = times.len().min(capacity);
        ptr::copy_nonoverlapping(times.as_ptr(), buffer, k);
    }
    times.len()
}

/// # Safety
/// `events` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hawkes_events_free(events: *mut HawkesEvents) {
    if !events.is_null() {
        drop(Box::from_raw(events));
    }
}

/// Log-likelihood under a constant background `mu` and an `order`-term
/// exponential kernel.
///
/// # Safety
/// `alphas` and `betas` must hold `order` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hawkes_log_likelihood_const(
    events: *const HawkesEvents,
    mu: f64,
    alphas: *const f64,
    betas: *const f64,
    order: usize,
    out: *mut f64,
) -> HawkesStatus {
    guard(|| {
        let seq = &events.as_ref().ok_or_else(|| null("events"))?.inner;
        let kernel = kernel_arg(alphas, betas, order)?;
        let bg = ConstantBackground::new(mu, seq.window())?;
        write_out(out, log_likelihood(seq, &kernel, &bg)?)
    })
}

/// Fits a model. `knot_spacing` is used by the piecewise-linear family and
/// `k` (events per basis) by the spline family; both are ignored otherwise.
///
/// # Safety
/// `events` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hawkes_fit(
    events: *const HawkesEvents,
    model: HawkesModel,
    order: usize,
    knot_spacing: f64,
    k: usize,
    out: *mut *mut HawkesFit,
) -> HawkesStatus {
    guard(|| {
        let seq = &events.as_ref().ok_or_else(|| null("events"))?.inner;
        let fit = match model {
            HawkesModel::Const => fit_mle(seq, &ModelSpec::Const, order)?,
            HawkesModel::PiecewiseLinear => {
                let knots = PiecewiseLinearBackground::regular_knots(seq.window(), knot_spacing)?;
                fit_mle(seq, &ModelSpec::PiecewiseLinear { knots }, order)?
            }
            HawkesModel::Bcb => fit_bcb(seq, order, k)?,
        };
        write_out(out, Box::into_raw(Box::new(HawkesFit { inner: fit })))
    })
}

/// Model-comparison score of a fit (higher is better).
///
/// # Safety
/// `fit` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hawkes_fit_score(fit: *const HawkesFit, out: *mut f64) -> HawkesStatus {
    guard(|| write_out(out, fit.as_ref().ok_or_else(|| null("fit"))?.inner.score))
}

/// Branching ratio `Σ α_j` of a fit.
///
/// # Safety
/// `fit` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hawkes_fit_branching_ratio(fit: *const HawkesFit, out: *mut f64) -> HawkesStatus {
    guard(|| write_out(out, fit.as_ref().ok_or_else(|| null("fit"))?.inner.branching_ratio))
}

/// Whether the optimizer met its convergence tolerance (1) or not (0).
///
/// # Safety
/// `fit` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hawkes_fit_converged(fit: *const HawkesFit, out: *mut i32) -> HawkesStatus {
    guard(|| {
        let f = fit.as_ref().ok_or_else(|| null("fit"))?;
        write_out(out, i32::from(f.inner.diagnostics.converged))
    })
}

/// The fit as a JSON document. Release the string with [`hawkes_string_free`].
///
/// # Safety
/// `fit` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hawkes_fit_to_json(fit: *const HawkesFit, out: *mut *mut c_char) -> HawkesStatus {
    guard(|| {
        let json = fit.as_ref().ok_or_else(|| null("fit"))?.inner.to_json()?;
        let c = CString::new(json).map_err(|_| Failure(HawkesStatus::Numerical, "NUL in JSON".into()))?;
        write_out(out, c.into_raw())
    })
}

/// # Safety
/// `fit` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hawkes_fit_free(fit: *mut HawkesFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hawkes_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Simulates on `[start, end]` with constant background `mu`. The same
/// seed always gives the same sequence.
///
/// # Safety
/// `alphas` and `betas` must hold `order` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hawkes_simulate_const(
    start: f64,
    end: f64,
    mu: f64,
    alphas: *const f64,
    betas: *const f64,
    order: usize,
    seed: u64,
    out: *mut *mut HawkesEvents,
) -> HawkesStatus {
    guard(|| {
        let kernel = kernel_arg(alphas, betas, order)?;
        let bg = ConstantBackground::new(mu, ObservationWindow::new(start, end)?)?;
        let seq = simulate(&bg, &kernel, seed)?;
        write_out(out, Box::into_raw(Box::new(HawkesEvents { inner: seq })))
    })
}

/// Kolmogorov–Smirnov test of `n` values against U(0, 1).
///
/// # Safety
/// `values` must hold `n` doubles; `statistic` and `p_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hawkes_ks_uniform(
    values: *const f64,
    n: usize,
    statistic: *mut f64,
    p_value: *mut f64,
) -> HawkesStatus {
    guard(|| {
        if statistic.is_null() || p_value.is_null() {
            return Err(null("output pointer"));
        }
        let ks = ks_test_uniform(slice_arg(values, n, "values")?)?;
        write_out(statistic, ks.statistic)?;
        write_out(p_value, ks.p_value)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn message() -> String {
        unsafe { CStr::from_ptr(hawkes_last_error_message()) }
            .to_string_lossy()
            .into_owned()
    }

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::Domain("x".into())), HawkesStatus::Domain);
        assert_eq!(status_of(&Error::UnstableKernel(1.2)), HawkesStatus::InvalidArgument);
        assert_eq!(
            status_of(&Error::NotPositiveDefinite("x".into())),
            HawkesStatus::Numerical
        );
    }

    #[test]
    fn panics_become_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, HawkesStatus::Panic);
        assert!(message().contains("boom"));
        assert_eq!(guard(|| Ok(())), HawkesStatus::Ok);
        assert!(message().is_empty());
    }
}
