//! C ABI over the solver: configure a run through an opaque handle, execute
//! it, and read back the error quantities.
//!
//! Every function returns an [`RcStatus`]; on failure a message is kept per
//! thread and can be read with [`rc_last_error`]. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use robin_coupling::diagnostics::ErrorReport;
use robin_coupling::experiments::{run_level, ExperimentConfig};
use robin_coupling::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ResourceLimit = 3,
    SingularSystem = 4,
    Internal = 5,
    Panic = 6,
}

/// Error quantities of one run, as defined by the Rust `ErrorReport`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RcReport {
    pub level: u32,
    pub n_steps: u32,
    pub dt: f64,
    pub h: f64,
    pub e_u: f64,
    pub e_du: f64,
    pub e_dw: f64,
    pub e_gdu: f64,
    pub e_gdus: f64,
    pub e_gdws: f64,
    pub e_dls: f64,
    pub e_gdu2s: f64,
    pub e_ggdus: f64,
}

impl From<&ErrorReport> for RcReport {
    fn from(r: &ErrorReport) -> Self {
        Self {
            level: r.level.unwrap_or(0),
            n_steps: r.n_steps as u32,
            dt: r.dt,
            h: r.h,
            e_u: r.e_u,
            e_du: r.e_du,
            e_dw: r.e_dw,
            e_gdu: r.e_gdu,
            e_gdus: r.e_gdus,
            e_gdws: r.e_gdws,
            e_dls: r.e_dls,
            e_gdu2s: r.e_gdu2s,
            e_ggdus: r.e_ggdus,
        }
    }
}

/// Opaque run configuration.
pub struct RcRun {
    config: ExperimentConfig,
    level: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> RcStatus {
    match e {
        Error::ResourceLimit(_) => RcStatus::ResourceLimit,
        Error::Config(_) => RcStatus::InvalidArgument,
        Error::SingularSystem { .. } | Error::SingularScheme { .. } => RcStatus::SingularSystem,
        _ => RcStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (RcStatus, String)>) -> RcStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RcStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (RcStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (RcStatus, String)> {
    if p.is_null() {
        return Err((RcStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (RcStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a>(run: *mut RcRun) -> Result<&'a mut RcRun, (RcStatus, String)> {
    run.as_mut()
        .ok_or((RcStatus::NullPointer, "run handle is null".to_string()))
}

/// Creates a run for `case` (`example1`, `example2`, `example3`, `zero`) and
/// `variant` (`original`, `improved`, `monolithic`) at level 3 with the
/// default settings. Free with [`rc_run_free`].
///
/// # Safety
/// `case` and `variant` must be null or NUL-terminated strings; `out` must be
/// null or point to writable storage for a pointer.
#[no_mangle]
pub unsafe extern "C" fn rc_run_new(case: *const c_char, variant: *const c_char, out: *mut *mut RcRun) -> RcStatus {
    guard(|| {
        if out.is_null() {
            return Err((RcStatus::NullPointer, "out is null".into()));
        }
        *out = ptr::null_mut();
        let config = ExperimentConfig {
            case: read_str(case, "case")?.to_string(),
            variant: read_str(variant, "variant")?.to_string(),
            ..Default::default()
        };
        config.case().map_err(lib_err)?;
        config.variant().map_err(lib_err)?;
        *out = Box::into_raw(Box::new(RcRun { config, level: 3 }));
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a handle from [`rc_run_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rc_run_free(run: *mut RcRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Level `k`, giving `Δt = h = 2^-(k+1)`.
///
/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rc_run_set_level(run: *mut RcRun, level: u32) -> RcStatus {
    guard(|| {
        handle(run)?.level = level;
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rc_run_set_alpha(run: *mut RcRun, alpha: f64) -> RcStatus {
    guard(|| {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err((RcStatus::InvalidArgument, format!("alpha must be positive, got {alpha}")));
        }
        handle(run)?.config.alpha = alpha;
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rc_run_set_final_time(run: *mut RcRun, final_time: f64) -> RcStatus {
    guard(|| {
        if !(final_time > 0.0 && final_time.is_finite()) {
            return Err((RcStatus::InvalidArgument, format!("final time must be positive, got {final_time}")));
        }
        handle(run)?.config.final_time = final_time;
        Ok(())
    })
}

/// Finite-element order 1 or 2; 0 restores the case default.
///
/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rc_run_set_order(run: *mut RcRun, order: u32) -> RcStatus {
    guard(|| {
        let r = handle(run)?;
        r.config.order = match order {
            0 => None,
            1 | 2 => Some(order as usize),
            _ => return Err((RcStatus::InvalidArgument, format!("order must be 1 or 2, got {order}"))),
        };
        Ok(())
    })
}

/// Permits levels 7 and 8.
///
/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rc_run_allow_large(run: *mut RcRun, allow: bool) -> RcStatus {
    guard(|| {
        handle(run)?.config.allow_large = allow;
        Ok(())
    })
}

/// Runs the scheme to the final time and fills `report`.
///
/// # Safety
/// `run` must be a live handle and `report` writable.
#[no_mangle]
pub unsafe extern "C" fn rc_run_execute(run: *mut RcRun, report: *mut RcReport) -> RcStatus {
    guard(|| {
        let r = handle(run)?;
        if report.is_null() {
            return Err((RcStatus::NullPointer, "report is null".into()));
        }
        let mut cfg = r.config.clone();
        cfg.kmin = r.level;
        cfg.kmax = r.level;
        cfg.validate().map_err(lib_err)?;
        let variant = cfg.variant().map_err(lib_err)?;
        let rep = run_level(&cfg, variant, r.level).map_err(lib_err)?;
        *report = RcReport::from(&rep);
        Ok(())
    })
}

/// Message for the last failure on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn rc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
