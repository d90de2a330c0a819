//! C ABI over the simulator. Models are opaque handles created by
//! `pl_model_new_*` and released with `pl_model_free`. Every fallible call
//! returns a `PlStatus`; on failure `pl_last_error_message` describes the
//! error for the calling thread until its next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64 as C64;
use pointer_limit::born::{self, COL_NORM_ERROR, COL_OVERLAP, COL_POINTER, COL_RHO01, COL_THRESHOLD};
use pointer_limit::dynamics::{uniform_times, EvolutionConfig, Method};
use pointer_limit::model::ModelSpec;
use pointer_limit::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NonConvergence = 3,
    BufferTooSmall = 4,
    Internal = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlMethod {
    Krylov = 0,
    Dense = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PlComplex {
    pub re: f64,
    pub im: f64,
}

/// One trajectory sample; `overlap_d` is NaN when a branch is absent.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PlSample {
    pub t: f64,
    pub pointer_expectation: f64,
    pub threshold_prob: f64,
    pub rho01_abs: f64,
    pub overlap_d: f64,
    pub norm_error: f64,
}

/// `time_avg_d` is NaN when a branch is absent.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PlBornEstimate {
    pub p_hat: f64,
    pub target: f64,
    pub abs_error: f64,
    pub mixture_distance: f64,
    pub tail_variation: f64,
    pub time_avg_d: f64,
    pub converged: bool,
}

/// Evolution settings; zero fields take the library defaults.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlEvolution {
    pub method: PlMethod,
    pub dt: f64,
    pub tolerance: f64,
    pub krylov_dim: usize,
}

/// Opaque model handle.
pub struct PlModel {
    spec: ModelSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(e: &Error) -> PlStatus {
    match e {
        Error::NonConvergence { .. } => PlStatus::NonConvergence,
        Error::Io(_) | Error::Csv(_) => PlStatus::Internal,
        _ => PlStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (PlStatus, String)>) -> PlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PlStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PlStatus::Internal
        }
    }
}

fn lift(e: Error) -> (PlStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PlStatus, String) {
    (PlStatus::NullPointer, format!("{what} is null"))
}

fn evolution_config(e: Option<&PlEvolution>) -> EvolutionConfig {
    let mut cfg = EvolutionConfig::default();
    if let Some(e) = e {
        cfg.method = match e.method {
            PlMethod::Krylov => Method::IterativeKrylov,
            PlMethod::Dense => Method::DenseEigen,
        };
        if e.dt != 0.0 {
            cfg.dt = e.dt;
        }
        if e.tolerance != 0.0 {
            cfg.tolerance = e.tolerance;
        }
        if e.krylov_dim != 0 {
            cfg.krylov_dim = e.krylov_dim;
        }
    }
    cfg
}

fn c64(z: PlComplex) -> C64 {
    C64::new(z.re, z.im)
}

fn finish_model(spec: pointer_limit::Result<ModelSpec>, alpha: f64, epsilon: f64, out: *mut *mut PlModel) -> Result<(), (PlStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    let spec = spec
        .and_then(|s| s.with_basis_angle(alpha))
        .and_then(|s| s.with_self_energy(epsilon))
        .map_err(lift)?;
    // SAFETY: `out` is non-null and points to writable storage per the contract.
    unsafe { *out = Box::into_raw(Box::new(PlModel { spec })) };
    Ok(())
}

/// Model with every coupling equal to `g`.
///
/// # Safety
/// `out` must point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn pl_model_new_uniform(
    n: usize,
    g: f64,
    alpha: f64,
    epsilon: f64,
    out: *mut *mut PlModel,
) -> PlStatus {
    guard(|| finish_model(ModelSpec::uniform(n, g), alpha, epsilon, out))
}

/// Model with couplings drawn uniformly from [g_min, g_max] by `seed`.
///
/// # Safety
/// `out` must point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn pl_model_new_disordered(
    n: usize,
    seed: u64,
    g_min: f64,
    g_max: f64,
    alpha: f64,
    epsilon: f64,
    out: *mut *mut PlModel,
) -> PlStatus {
    guard(|| finish_model(ModelSpec::disordered(n, seed, g_min, g_max), alpha, epsilon, out))
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `model` must be null or a handle from `pl_model_new_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pl_model_free(model: *mut PlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of amplifier units, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_model_units(model: *const PlModel) -> usize {
    model.as_ref().map_or(0, |m| m.spec.n())
}

/// Copies the couplings into `out`, which holds `len` doubles.
///
/// # Safety
/// `model` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn pl_model_couplings(model: *const PlModel, out: *mut f64, len: usize) -> PlStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let g = m.spec.couplings();
        if len < g.len() {
            return Err((PlStatus::BufferTooSmall, format!("need {} slots, got {len}", g.len())));
        }
        ptr::copy_nonoverlapping(g.as_ptr(), out, g.len());
        Ok(())
    })
}

/// Number of samples `pl_simulate` produces for `t_max` and `dt`.
#[no_mangle]
pub extern "C" fn pl_sample_count(t_max: f64, dt: f64) -> usize {
    if !(t_max >= 0.0 && dt > 0.0) {
        return 0;
    }
    uniform_times(t_max, dt).len()
}

/// Samples the trajectory from the inverted initial state at t = 0, dt, …, t_max.
/// `evolution` may be null for defaults; its `dt` is ignored in favour of `dt`.
///
/// # Safety
/// `model` must be a live handle, `evolution` null or valid, `out` valid for
/// `capacity` writes and `written` writable.
#[no_mangle]
pub unsafe extern "C" fn pl_simulate(
    model: *const PlModel,
    c0: PlComplex,
    c1: PlComplex,
    theta: f64,
    t_max: f64,
    dt: f64,
    evolution: *const PlEvolution,
    out: *mut PlSample,
    capacity: usize,
    written: *mut usize,
) -> PlStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if written.is_null() {
            return Err(null("written"));
        }
        let mut cfg = evolution_config(evolution.as_ref());
        cfg.dt = dt;
        cfg.validate().map_err(lift)?;
        if !(t_max >= 0.0 && t_max.is_finite()) {
            return Err((PlStatus::InvalidArgument, format!("t_max must be >= 0, got {t_max}")));
        }
        let times = uniform_times(t_max, dt);
        if capacity < times.len() {
            return Err((
                PlStatus::BufferTooSmall,
                format!("need {} samples, got {capacity}", times.len()),
            ));
        }
        let series = born::measure_trajectory(&m.spec, c64(c0), c64(c1), theta, &times, &cfg)
            .map_err(lift)?;
        let col = |name| series.values(name).map_err(lift);
        let (p, th, rho, d, ne) = (
            col(COL_POINTER)?,
            col(COL_THRESHOLD)?,
            col(COL_RHO01)?,
            col(COL_OVERLAP)?,
            col(COL_NORM_ERROR)?,
        );
        let out = std::slice::from_raw_parts_mut(out, times.len());
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = PlSample {
                t: times[i],
                pointer_expectation: p[i],
                threshold_prob: th[i],
                rho01_abs: rho[i],
                overlap_d: d[i],
                norm_error: ne[i],
            };
        }
        *written = times.len();
        Ok(())
    })
}

/// Time-averaged detection probability over [0, t_max].
///
/// # Safety
/// `model` must be a live handle, `evolution` null or valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pl_born_estimate(
    model: *const PlModel,
    c0: PlComplex,
    c1: PlComplex,
    theta: f64,
    t_max: f64,
    evolution: *const PlEvolution,
    out: *mut PlBornEstimate,
) -> PlStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = evolution_config(evolution.as_ref());
        let est = born::born_estimate(&m.spec, c64(c0), c64(c1), theta, t_max, &cfg).map_err(lift)?;
        *out = PlBornEstimate {
            p_hat: est.p_hat,
            target: est.target,
            abs_error: est.abs_error,
            mixture_distance: est.mixture_distance(),
            tail_variation: est.tail_variation,
            time_avg_d: est.time_avg_d.unwrap_or(f64::NAN),
            converged: est.converged,
        };
        Ok(())
    })
}

/// Operator norm of the commutator of the two setups' projectors.
#[no_mangle]
pub extern "C" fn pl_setup_commutator(alpha: f64, alpha_prime: f64) -> f64 {
    born::setup_commutator(alpha, alpha_prime)
}

/// Message of the calling thread's last failure; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}
