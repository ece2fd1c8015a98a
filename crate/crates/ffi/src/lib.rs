//! C interface to `robin-ucp`.
//!
//! Solutions and profiles are opaque handles created by the
//! `rucp_solution_*` and `rucp_profile_build` functions and released with the
//! matching `_free`. Every fallible call
//! returns an [`RucpStatus`]; the message of the last failure on the calling
//! thread is available from [`rucp_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use robin_ucp::cli::{run_experiment, ExperimentConfig, Outcome};
use robin_ucp::frequency::{build_profile, FrequencyConfig, FrequencyProfile};
use robin_ucp::solutions::{analytic_solution, solve_robin_fem, Mesh, Solution};
use robin_ucp::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RucpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownName = 3,
    Config = 4,
    Numerical = 5,
    NotASolution = 6,
    /// The run finished but some inequality failed.
    Violations = 7,
    Io = 8,
    Panic = 9,
}

/// A solution together with its coefficient set.
pub struct RucpSolution(Solution<2>);

/// A frequency profile over a radius grid.
pub struct RucpProfile(FrequencyProfile);

/// One row of a profile.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RucpProfileRow {
    pub r: f64,
    pub h: f64,
    pub i: f64,
    pub n: f64,
    pub dn: f64,
    pub ntilde: f64,
    pub valid: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> RucpStatus {
    match e {
        Error::UnknownName(_) => RucpStatus::UnknownName,
        Error::InvalidParameter(_) | Error::EmptyGrid => RucpStatus::InvalidArgument,
        Error::Config(_) => RucpStatus::Config,
        Error::NotASolution { .. } => RucpStatus::NotASolution,
        Error::Io(_) => RucpStatus::Io,
        _ => RucpStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), RucpStatus>) -> RucpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RucpStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            RucpStatus::Panic
        }
    }
}

fn fail(e: Error) -> RucpStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null() -> RucpStatus {
    set_error("null pointer argument".into());
    RucpStatus::NullPointer
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, RucpStatus> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not UTF-8".into());
        RucpStatus::InvalidArgument
    })
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize) -> Result<&'a [f64], RucpStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rucp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rucp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Create an analytic catalogue solution.
///
/// # Safety
/// `name` must be a NUL-terminated string, `params` must point to
/// `n_params` doubles (or be null when `n_params` is 0) and `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rucp_solution_analytic(
    name: *const c_char,
    params: *const f64,
    n_params: usize,
    out: *mut *mut RucpSolution,
) -> RucpStatus {
    guard(|| {
        let name = str_arg(name)?;
        let params = slice_arg(params, n_params)?;
        if out.is_null() {
            return Err(null());
        }
        let sol = analytic_solution(name, params).map_err(fail)?;
        *out = Box::into_raw(Box::new(RucpSolution(sol)));
        Ok(())
    })
}

/// P1 solution on the half-disk mesh of the given refinement level, with the
/// coefficients of the named analytic entry and its values as arc data.
///
/// # Safety
/// As for [`rucp_solution_analytic`].
#[no_mangle]
pub unsafe extern "C" fn rucp_solution_fem(
    name: *const c_char,
    params: *const f64,
    n_params: usize,
    level: usize,
    out: *mut *mut RucpSolution,
) -> RucpStatus {
    guard(|| {
        let name = str_arg(name)?;
        let params = slice_arg(params, n_params)?;
        if out.is_null() {
            return Err(null());
        }
        let truth = analytic_solution(name, params).map_err(fail)?;
        let mesh = Mesh::half_disk(1.0, level).map_err(fail)?;
        let sol = solve_robin_fem(&truth.coefficients, &mesh, |x| truth.value_grad(x).0).map_err(fail)?;
        *out = Box::into_raw(Box::new(RucpSolution(sol)));
        Ok(())
    })
}

/// # Safety
/// `sol` must come from a `rucp_solution_*` constructor and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn rucp_solution_free(sol: *mut RucpSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Value and gradient at `x` (two doubles). `grad` may be null.
///
/// # Safety
/// `sol` must be a live handle; `x` must point to two doubles, `value` to
/// one and `grad`, if non-null, to two.
#[no_mangle]
pub unsafe extern "C" fn rucp_solution_eval(
    sol: *const RucpSolution,
    x: *const f64,
    value: *mut f64,
    grad: *mut f64,
) -> RucpStatus {
    guard(|| {
        if sol.is_null() || x.is_null() || value.is_null() {
            return Err(null());
        }
        let p = [*x, *x.add(1)];
        let (u, du) = (*sol).0.value_grad(&p);
        *value = u;
        if !grad.is_null() {
            *grad = du[0];
            *grad.add(1) = du[1];
        }
        Ok(())
    })
}

/// Measured weak-form residual, or NaN when none was measured.
///
/// # Safety
/// `sol` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rucp_solution_residual(sol: *const RucpSolution) -> f64 {
    if sol.is_null() {
        return f64::NAN;
    }
    (*sol).0.residual.unwrap_or(f64::NAN)
}

/// Frequency profile of `sol` with weight exponent `alpha` on `radii`.
///
/// # Safety
/// `sol` must be a live handle, `radii` must point to `n` doubles and `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rucp_profile_build(
    sol: *const RucpSolution,
    alpha: f64,
    radii: *const f64,
    n: usize,
    out: *mut *mut RucpProfile,
) -> RucpStatus {
    guard(|| {
        if sol.is_null() || out.is_null() {
            return Err(null());
        }
        let radii = slice_arg(radii, n)?;
        let fc = FrequencyConfig::new(alpha, radii.to_vec());
        let profile = build_profile(&(*sol).0, &fc).map_err(fail)?;
        *out = Box::into_raw(Box::new(RucpProfile(profile)));
        Ok(())
    })
}

/// # Safety
/// `profile` must come from [`rucp_profile_build`] and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn rucp_profile_free(profile: *mut RucpProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Number of rows; 0 for null.
///
/// # Safety
/// `profile` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rucp_profile_len(profile: *const RucpProfile) -> usize {
    if profile.is_null() {
        0
    } else {
        (*profile).0.rows.len()
    }
}

/// `N` at radius `min(1, r_max)`; NaN for null.
///
/// # Safety
/// `profile` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rucp_profile_n_at_one(profile: *const RucpProfile) -> f64 {
    if profile.is_null() {
        f64::NAN
    } else {
        (*profile).0.n_at_one
    }
}

/// Copy row `index` into `out`.
///
/// # Safety
/// `profile` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rucp_profile_row(
    profile: *const RucpProfile,
    index: usize,
    out: *mut RucpProfileRow,
) -> RucpStatus {
    guard(|| {
        if profile.is_null() || out.is_null() {
            return Err(null());
        }
        let profile = &*profile;
        let Some(row) = profile.0.rows.get(index) else {
            set_error(format!("row {index} out of range"));
            return Err(RucpStatus::InvalidArgument);
        };
        *out = RucpProfileRow {
            r: row.integrals.r,
            h: row.integrals.h,
            i: row.integrals.i,
            n: row.n,
            dn: row.dn,
            ntilde: row.ntilde,
            valid: row.valid,
        };
        Ok(())
    })
}

/// Run a TOML experiment and write its reports to `output_dir` (or the
/// directory named in the config when null).
///
/// # Safety
/// `config_toml` must be a NUL-terminated string; `output_dir` must be one
/// or null.
#[no_mangle]
pub unsafe extern "C" fn rucp_run_config(config_toml: *const c_char, output_dir: *const c_char) -> RucpStatus {
    guard(|| {
        let text = str_arg(config_toml)?;
        let dir = if output_dir.is_null() {
            None
        } else {
            Some(Path::new(str_arg(output_dir)?))
        };
        let cfg = ExperimentConfig::from_toml(text).map_err(fail)?;
        match run_experiment(&cfg, dir, false).map_err(fail)? {
            Outcome::Clean => Ok(()),
            Outcome::Violations(v) => {
                set_error(format!("inequality violations: {}", v.join(", ")));
                Err(RucpStatus::Violations)
            }
        }
    })
}
