//! C interface to the backhaul optimizer.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `_free` function. Every fallible call returns a [`BhStatus`];
//! on failure the message is available from [`bh_last_error`] on the same
//! thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use backhaul::experiment::{
    build_instance, solve_instance, ExperimentConfig, ExperimentError, Instance, SolveOutcome,
    SolveSettings,
};

/// Result codes. The first four match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BhStatus {
    Ok = 0,
    ConfigError = 1,
    SolverError = 2,
    Infeasible = 3,
    NullPointer = 4,
    InvalidArgument = 5,
    Panic = 6,
}

/// A network with its configuration and interference matrix.
pub struct BhInstance {
    config: ExperimentConfig,
    instance: Instance,
}

/// A solved instance: objective, schedule and exact throughput report.
pub struct BhOutcome {
    outcome: SolveOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn fail(status: BhStatus, msg: impl Into<String>) -> BhStatus {
    set_error(msg);
    status
}

fn from_error(e: &ExperimentError) -> BhStatus {
    let status = match e.exit_code() {
        1 => BhStatus::ConfigError,
        3 => BhStatus::Infeasible,
        _ => BhStatus::SolverError,
    };
    fail(status, e.to_string())
}

fn guarded(f: impl FnOnce() -> BhStatus) -> BhStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(BhStatus::Panic, "internal panic"))
}

/// Reads an optional C string; null means empty.
unsafe fn text_arg<'a>(s: *const c_char) -> Result<&'a str, BhStatus> {
    if s.is_null() {
        return Ok("");
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(BhStatus::InvalidArgument, "string argument is not valid UTF-8"))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bh_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Build an instance from a TOML configuration. Null or empty text selects
/// the defaults.
///
/// # Safety
/// `config_toml` must be null or a NUL-terminated string; `out` must be a
/// valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn bh_instance_new(
    config_toml: *const c_char,
    out: *mut *mut BhInstance,
) -> BhStatus {
    guarded(|| {
        if out.is_null() {
            return fail(BhStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let text = match text_arg(config_toml) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let config = match ExperimentConfig::from_toml(text) {
            Ok(c) => c,
            Err(e) => return from_error(&e),
        };
        match build_instance(&config) {
            Ok(instance) => {
                *out = Box::into_raw(Box::new(BhInstance { config, instance }));
                BhStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// # Safety
/// `inst` must be null or a handle from [`bh_instance_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bh_instance_free(inst: *mut BhInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// # Safety
/// `inst` must be null or a live instance handle.
#[no_mangle]
pub unsafe extern "C" fn bh_instance_num_nodes(inst: *const BhInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.instance.net.num_nodes())
}

/// # Safety
/// `inst` must be null or a live instance handle.
#[no_mangle]
pub unsafe extern "C" fn bh_instance_num_links(inst: *const BhInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.instance.net.num_links())
}

/// Solve with the model and solver settings of the instance configuration.
/// `slots` overrides the slot count when nonzero, `time_limit_s` the time
/// limit when positive.
///
/// # Safety
/// `inst` must be a live instance handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bh_solve(
    inst: *const BhInstance,
    slots: usize,
    time_limit_s: f64,
    out: *mut *mut BhOutcome,
) -> BhStatus {
    guarded(|| {
        if out.is_null() {
            return fail(BhStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let Some(inst) = inst.as_ref() else {
            return fail(BhStatus::NullPointer, "instance is null");
        };
        let mut s = SolveSettings::from_config(&inst.config);
        if slots > 0 {
            s.slots = slots;
        }
        if time_limit_s > 0.0 {
            s.time_limit = Some(time_limit_s);
        }
        match solve_instance(&inst.instance.net, &inst.instance.matrix, &s) {
            Ok(outcome) => {
                *out = Box::into_raw(Box::new(BhOutcome { outcome }));
                BhStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// # Safety
/// `o` must be null or a handle from [`bh_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bh_outcome_free(o: *mut BhOutcome) {
    if !o.is_null() {
        drop(Box::from_raw(o));
    }
}

/// Max-min service of the model, or NaN for a null handle.
///
/// # Safety
/// `o` must be null or a live outcome handle.
#[no_mangle]
pub unsafe extern "C" fn bh_outcome_objective(o: *const BhOutcome) -> f64 {
    o.as_ref().map_or(f64::NAN, |o| o.outcome.objective)
}

/// Max-min service of the schedule under exact interference.
///
/// # Safety
/// `o` must be null or a live outcome handle.
#[no_mangle]
pub unsafe extern "C" fn bh_outcome_max_min(o: *const BhOutcome) -> f64 {
    o.as_ref().map_or(f64::NAN, |o| o.outcome.report.max_min)
}

/// # Safety
/// `o` must be null or a live outcome handle.
#[no_mangle]
pub unsafe extern "C" fn bh_outcome_gap(o: *const BhOutcome) -> f64 {
    o.as_ref().map_or(f64::NAN, |o| o.outcome.gap)
}

/// # Safety
/// `o` must be null or a live outcome handle.
#[no_mangle]
pub unsafe extern "C" fn bh_outcome_num_slots(o: *const BhOutcome) -> usize {
    o.as_ref().map_or(0, |o| o.outcome.schedule.slots.len())
}

/// Length and active links of slot `index`. Up to `capacity` link ids are
/// copied to `links`; `num_links` receives the full count, so a call with
/// `capacity = 0` queries the size.
///
/// # Safety
/// `o` must be a live outcome handle, `length` and `num_links` valid
/// pointers, and `links` valid for `capacity` writes when `capacity > 0`.
#[no_mangle]
pub unsafe extern "C" fn bh_outcome_slot(
    o: *const BhOutcome,
    index: usize,
    length: *mut f64,
    links: *mut usize,
    capacity: usize,
    num_links: *mut usize,
) -> BhStatus {
    guarded(|| {
        let Some(o) = o.as_ref() else {
            return fail(BhStatus::NullPointer, "outcome is null");
        };
        if length.is_null() || num_links.is_null() || (capacity > 0 && links.is_null()) {
            return fail(BhStatus::NullPointer, "output pointer is null");
        }
        let Some(slot) = o.outcome.schedule.slots.get(index) else {
            return fail(BhStatus::InvalidArgument, format!("slot {index} does not exist"));
        };
        *length = slot.length;
        *num_links = slot.links.len();
        for (i, &l) in slot.links.iter().take(capacity).enumerate() {
            *links.add(i) = l;
        }
        BhStatus::Ok
    })
}

/// The full outcome as JSON. Release the string with [`bh_string_free`].
/// Returns null on failure.
///
/// # Safety
/// `o` must be null or a live outcome handle.
#[no_mangle]
pub unsafe extern "C" fn bh_outcome_to_json(o: *const BhOutcome) -> *mut c_char {
    let Some(o) = o.as_ref() else {
        set_error("outcome is null");
        return ptr::null_mut();
    };
    match serde_json::to_string(&o.outcome) {
        Ok(s) => CString::new(s).map_or(ptr::null_mut(), CString::into_raw),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bh_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
