//! C ABI for the closed-form bounds and the Gaussian-mixture fit.
//!
//! Every function returns a [`FracviStatus`]; results are written through
//! out-pointers. On failure the message is available from
//! [`fracvi_last_error_message`] on the same thread.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, UnwindSafe};
use std::ptr;
use std::slice;

use fracvi::bounds::{self, ConjugateGaussianModel};
use fracvi::calibration;
use fracvi::gmm::{self, GmmModel, GmmState};
use fracvi::{Error, Fraction, Gaussian1D};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracviStatus {
    Ok = 0,
    NullPointer = 1,
    DivergenceInfinite = 2,
    InvalidGaussian = 3,
    InvalidFraction = 4,
    InvalidVariance = 5,
    DimensionTooLarge = 6,
    RegressionDegenerate = 7,
    SubsetInvalid = 8,
    InvalidArgument = 9,
    Panic = 10,
}

impl From<&Error> for FracviStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DivergenceInfinite(_) => Self::DivergenceInfinite,
            Error::InvalidGaussian { .. } => Self::InvalidGaussian,
            Error::InvalidFraction(_) => Self::InvalidFraction,
            Error::InvalidVariance(_) => Self::InvalidVariance,
            Error::DimensionTooLarge(_) => Self::DimensionTooLarge,
            Error::RegressionDegenerate(_) => Self::RegressionDegenerate,
            Error::SubsetInvalid { .. } => Self::SubsetInvalid,
            Error::InvalidArgument(_) => Self::InvalidArgument,
        }
    }
}

/// A univariate Gaussian by mean and variance.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracviGaussian {
    pub mean: f64,
    pub variance: f64,
}

/// The two terms of a bound and their difference.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracviBound {
    pub data_term: f64,
    pub complexity_term: f64,
    pub total: f64,
}

/// A fitted Gaussian mixture.
pub struct FracviGmmFit {
    state: GmmState,
    bound: f64,
    iterations: usize,
    converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard<F>(f: F) -> FracviStatus
where
    F: FnOnce() -> Result<(), Failure> + UnwindSafe,
{
    match catch_unwind(f) {
        Ok(Ok(())) => FracviStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            FracviStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            FracviStatus::from(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            FracviStatus::Panic
        }
    }
}

fn gaussian(g: FracviGaussian) -> Result<Gaussian1D, Failure> {
    Ok(Gaussian1D::new(g.mean, g.variance)?)
}

fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller passes either NULL or a valid, writable pointer.
    unsafe { p.as_mut() }.ok_or(Failure::Null(name))
}

fn slice_in<'a>(data: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(Failure::Null(name));
    }
    // SAFETY: the caller guarantees `len` readable doubles at `data`.
    Ok(unsafe { slice::from_raw_parts(data, len) })
}

fn conjugate_model(prior: FracviGaussian, obs_variance: f64, data: *const f64, len: usize) -> Result<ConjugateGaussianModel, Failure> {
    Ok(ConjugateGaussianModel::new(gaussian(prior)?, obs_variance, slice_in(data, len, "data")?.to_vec())?)
}

fn write_bound(dst: *mut FracviBound, b: &fracvi::BoundValue) -> Result<(), Failure> {
    *out(dst, "out")? = FracviBound { data_term: b.data_term, complexity_term: b.complexity_term, total: b.total };
    Ok(())
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fracvi_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// `KL(q ‖ p)`.
///
/// # Safety
/// Out-pointers must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn fracvi_kl_gaussian(q: FracviGaussian, p: FracviGaussian, result: *mut f64) -> FracviStatus {
    guard(|| {
        *out(result, "result")? = bounds::kl_gaussian(&gaussian(q)?, &gaussian(p)?);
        Ok(())
    })
}

/// Rényi divergence `D_α(q ‖ p)`.
///
/// # Safety
/// Out-pointers must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn fracvi_renyi_gaussian(q: FracviGaussian, p: FracviGaussian, alpha: f64, result: *mut f64) -> FracviStatus {
    guard(|| {
        *out(result, "result")? = bounds::renyi_gaussian(&gaussian(q)?, &gaussian(p)?, alpha)?;
        Ok(())
    })
}

/// `log p(D)` of the conjugate Gaussian-mean model.
///
/// # Safety
/// `data` must point to `len` doubles (or be NULL with `len == 0`).
#[no_mangle]
pub unsafe extern "C" fn fracvi_log_evidence(
    prior: FracviGaussian,
    obs_variance: f64,
    data: *const f64,
    len: usize,
    result: *mut f64,
) -> FracviStatus {
    guard(|| {
        let model = conjugate_model(prior, obs_variance, data, len)?;
        *out(result, "result")? = bounds::log_evidence(&model);
        Ok(())
    })
}

/// `LB_γ` of `q` on the conjugate Gaussian-mean model; `γ = 1` gives the ELBO.
///
/// # Safety
/// `data` must point to `len` doubles (or be NULL with `len == 0`).
#[no_mangle]
pub unsafe extern "C" fn fracvi_lb_gamma(
    prior: FracviGaussian,
    obs_variance: f64,
    data: *const f64,
    len: usize,
    q: FracviGaussian,
    gamma: f64,
    result: *mut FracviBound,
) -> FracviStatus {
    guard(|| {
        let model = conjugate_model(prior, obs_variance, data, len)?;
        let q = gaussian(q)?;
        let fraction = Fraction::new(gamma)?;
        let b = if fraction.is_elbo() { bounds::elbo(&model, &q) } else { bounds::lb_gamma(&model, &q, fraction)? };
        write_bound(result, &b)
    })
}

/// The ELBO of `q` on the conjugate Gaussian-mean model.
///
/// # Safety
/// `data` must point to `len` doubles (or be NULL with `len == 0`).
#[no_mangle]
pub unsafe extern "C" fn fracvi_elbo(
    prior: FracviGaussian,
    obs_variance: f64,
    data: *const f64,
    len: usize,
    q: FracviGaussian,
    result: *mut FracviBound,
) -> FracviStatus {
    guard(|| {
        let model = conjugate_model(prior, obs_variance, data, len)?;
        write_bound(result, &bounds::elbo(&model, &gaussian(q)?))
    })
}

/// Interval length expected with `n/k` observations per component.
///
/// # Safety
/// Out-pointers must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn fracvi_ideal_length(k: usize, n: usize, obs_variance: f64, alpha: f64, result: *mut f64) -> FracviStatus {
    guard(|| {
        if k == 0 || n == 0 || !(obs_variance > 0.0) || !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need k, n ≥ 1, obs_variance > 0 and alpha in (0, 1); got k {k}, n {n}, obs_variance {obs_variance}, alpha {alpha}"
            ))
            .into());
        }
        *out(result, "result")? = calibration::ideal_length(k, n, obs_variance, alpha);
        Ok(())
    })
}

/// Central `1−α` credible interval of a Gaussian.
///
/// # Safety
/// Out-pointers must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn fracvi_credible_interval(g: FracviGaussian, alpha: f64, lower: *mut f64, upper: *mut f64) -> FracviStatus {
    guard(|| {
        let (lo, hi) = gmm::credible_interval(&gaussian(g)?, alpha)?;
        *out(lower, "lower")? = lo;
        *out(upper, "upper")? = hi;
        Ok(())
    })
}

/// Fit a `k`-component mixture with uniform assignment prior at fraction
/// `gamma ∈ (0, 1]` from the standard initialization. Release the handle
/// with [`fracvi_gmm_fit_free`].
///
/// # Safety
/// `data` must point to `len` doubles; `fit` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fracvi_gmm_fit(
    data: *const f64,
    len: usize,
    k: usize,
    prior_variance: f64,
    obs_variance: f64,
    gamma: f64,
    fit: *mut *mut FracviGmmFit,
) -> FracviStatus {
    guard(|| {
        let slot = out(fit, "fit")?;
        *slot = ptr::null_mut();
        let model = GmmModel::uniform(k, prior_variance, obs_variance, slice_in(data, len, "data")?.to_vec())?;
        let r = gmm::fit_default(&model, gamma)?;
        *slot = Box::into_raw(Box::new(FracviGmmFit {
            state: r.state,
            bound: r.bound,
            iterations: r.iterations,
            converged: r.converged,
        }));
        Ok(())
    })
}

fn handle<'a>(fit: *const FracviGmmFit) -> Result<&'a FracviGmmFit, Failure> {
    // SAFETY: non-NULL handles come from `fracvi_gmm_fit` and are live.
    unsafe { fit.as_ref() }.ok_or(Failure::Null("fit"))
}

/// Number of components of a fit.
///
/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fracvi_gmm_fit_components_len(fit: *const FracviGmmFit, result: *mut usize) -> FracviStatus {
    guard(|| {
        *out(result, "result")? = handle(fit)?.state.k();
        Ok(())
    })
}

/// Copy up to `capacity` fitted components into `components`; the number
/// copied is written to `written`.
///
/// # Safety
/// `fit` must be a live handle and `components` writable for `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn fracvi_gmm_fit_components(
    fit: *const FracviGmmFit,
    components: *mut FracviGaussian,
    capacity: usize,
    written: *mut usize,
) -> FracviStatus {
    guard(|| {
        let f = handle(fit)?;
        let count = f.state.components.len().min(capacity);
        if count > 0 && components.is_null() {
            return Err(Failure::Null("components"));
        }
        for (i, c) in f.state.components.iter().take(count).enumerate() {
            // SAFETY: `i < capacity` and the caller guarantees the buffer size.
            unsafe { *components.add(i) = FracviGaussian { mean: c.mean(), variance: c.variance() } };
        }
        *out(written, "written")? = count;
        Ok(())
    })
}

/// Final bound, sweep count and convergence flag of a fit. Any of the
/// out-pointers may be NULL.
///
/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fracvi_gmm_fit_summary(
    fit: *const FracviGmmFit,
    bound: *mut f64,
    iterations: *mut usize,
    converged: *mut bool,
) -> FracviStatus {
    guard(|| {
        let f = handle(fit)?;
        if let Ok(b) = out(bound, "bound") {
            *b = f.bound;
        }
        if let Ok(it) = out(iterations, "iterations") {
            *it = f.iterations;
        }
        if let Ok(c) = out(converged, "converged") {
            *c = f.converged;
        }
        Ok(())
    })
}

/// Release a fit. NULL is ignored.
///
/// # Safety
/// `fit` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fracvi_gmm_fit_free(fit: *mut FracviGmmFit) {
    if !fit.is_null() {
        // SAFETY: the handle was created by `Box::into_raw` in `fracvi_gmm_fit`.
        drop(unsafe { Box::from_raw(fit) });
    }
}
