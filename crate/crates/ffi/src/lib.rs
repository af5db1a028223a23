//! C ABI for the wavefront tracker.
//!
//! Models and trajectories are opaque handles created by `wf_*_new` /
//! `wf_simulate` and released with the matching `wf_*_free`. Every fallible
//! function returns a [`WfStatus`]; the message of the last failure on the
//! calling thread is available through [`wf_last_error`]. States cross the
//! boundary in real Riemann coordinates, row-major with `dim` entries each.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use wavefront::lab::{self, Scenario};
use wavefront::models::{model_by_name, FieldKind, SystemModel};
use wavefront::riemann::GridSpec;
use wavefront::tracker::{StepData, Tracker, Trajectory};
use wavefront::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownModel = 3,
    InvalidData = 4,
    TrackingFailed = 5,
    OutOfSpan = 6,
    Io = 7,
    Panic = 8,
}

pub struct WfModel(SystemModel);

pub struct WfTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> WfStatus {
    match e {
        Error::CatalogMiss(_) => WfStatus::UnknownModel,
        Error::OutOfDomain(_) | Error::NotOnGrid(_) | Error::NonMonotoneBreakpoints(_) | Error::Scenario(_) => WfStatus::InvalidData,
        Error::OutOfSpan { .. } => WfStatus::OutOfSpan,
        Error::Io(_) => WfStatus::Io,
        _ => WfStatus::TrackingFailed,
    }
}

struct Fail(WfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> WfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WfStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned());
            set_error(format!("panic: {}", msg.unwrap_or_default()));
            WfStatus::Panic
        }
    }
}

fn null() -> Fail {
    Fail(WfStatus::NullPointer, "null pointer argument".into())
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(null)
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null());
    }
    out.write(value);
    Ok(())
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(WfStatus::InvalidArgument, "string is not valid UTF-8".into()))
}

unsafe fn slice<'a>(p: *const f64, n: usize) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated,
/// always NUL-terminated when `cap > 0`). Returns the full length
/// including the terminator.
///
/// # Safety
/// `buf` must be valid for `cap` bytes or null with `cap == 0`.
#[no_mangle]
pub unsafe extern "C" fn wf_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Creates a built-in model (`decoupled`, `aw-rascle`, `ld-ld`) with default
/// parameters.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wf_model_new(name: *const c_char, out: *mut *mut WfModel) -> WfStatus {
    guard(|| {
        let model = model_by_name(str_arg(name)?, &BTreeMap::new())?;
        write(out, Box::into_raw(Box::new(WfModel(model))))
    })
}

/// # Safety
/// `model` must come from [`wf_model_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wf_model_free(model: *mut WfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wf_model_dim(model: *const WfModel, out: *mut usize) -> WfStatus {
    guard(|| write(out, deref(model)?.0.dim()))
}

/// Writes whether family `i` is linearly degenerate.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wf_model_is_linearly_degenerate(model: *const WfModel, i: usize, out: *mut bool) -> WfStatus {
    guard(|| {
        let m = &deref(model)?.0;
        if i >= m.dim() {
            return Err(Fail(WfStatus::InvalidArgument, format!("family {i} out of range")));
        }
        write(out, m.kind(i) == FieldKind::LinearlyDegenerate)
    })
}

/// Writes the domain box bounds; `lo` and `hi` hold `dim` entries each.
///
/// # Safety
/// `lo` and `hi` must be valid for `dim` writes.
#[no_mangle]
pub unsafe extern "C" fn wf_model_domain(model: *const WfModel, lo: *mut f64, hi: *mut f64) -> WfStatus {
    guard(|| {
        let d = deref(model)?.0.domain();
        if lo.is_null() || hi.is_null() {
            return Err(null());
        }
        ptr::copy_nonoverlapping(d.lo.as_ptr(), lo, d.lo.len());
        ptr::copy_nonoverlapping(d.hi.as_ptr(), hi, d.hi.len());
        Ok(())
    })
}

/// Tracks step data with `n_breaks` breakpoints and `n_breaks + 1` states
/// (projected onto the grid of level `nu`) up to `t_end`.
///
/// # Safety
/// `xs` must hold `n_breaks` values, `states` `(n_breaks + 1) * dim` values,
/// and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wf_simulate(
    model: *const WfModel,
    nu: u32,
    xs: *const f64,
    n_breaks: usize,
    states: *const f64,
    t_end: f64,
    out: *mut *mut WfTrajectory,
) -> WfStatus {
    guard(|| {
        let m = &deref(model)?.0;
        let xs = slice(xs, n_breaks)?.to_vec();
        let states: Vec<Vec<f64>> = slice(states, (n_breaks + 1) * m.dim())?.chunks(m.dim()).map(<[f64]>::to_vec).collect();
        if !(t_end.is_finite() && t_end >= 0.0) {
            return Err(Fail(WfStatus::InvalidArgument, format!("horizon {t_end} must be finite and nonnegative")));
        }
        for w in &states {
            if !m.domain().contains(w) {
                return Err(Error::OutOfDomain(w.clone()).into());
            }
        }
        let grid = GridSpec::new(nu);
        let data = StepData::projected(m, &grid, xs, &states).compressed();
        let traj = Tracker::simulate(m, &grid, &data, t_end)?;
        write(out, Box::into_raw(Box::new(WfTrajectory(traj))))
    })
}

/// # Safety
/// `traj` must come from [`wf_simulate`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wf_trajectory_free(traj: *mut WfTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wf_trajectory_event_count(traj: *const WfTrajectory, out: *mut usize) -> WfStatus {
    guard(|| write(out, deref(traj)?.0.events().len()))
}

/// Number of fronts alive at time `t`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wf_trajectory_front_count(traj: *const WfTrajectory, t: f64, out: *mut usize) -> WfStatus {
    guard(|| write(out, deref(traj)?.0.order_at(t)?.len()))
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wf_trajectory_end_time(traj: *const WfTrajectory, out: *mut f64) -> WfStatus {
    guard(|| write(out, deref(traj)?.0.end_time()))
}

/// Total variation and interaction potential at the final time, in grid
/// units.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wf_trajectory_monitors(traj: *const WfTrajectory, tv: *mut i64, q: *mut i64) -> WfStatus {
    guard(|| {
        let tr = &deref(traj)?.0;
        let m = tr.monitor_series().last().map_or(tr.initial_monitors(), |(_, m)| *m);
        write(tv, m.tv)?;
        write(q, m.q)
    })
}

/// Largest relative change of the conserved integral across one interaction.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wf_trajectory_max_mass_defect(traj: *const WfTrajectory, out: *mut f64) -> WfStatus {
    guard(|| write(out, deref(traj)?.0.events().iter().map(|e| e.mass_defect).fold(0.0, f64::max)))
}

/// Samples the solution at time `t` at `n` points; writes `n * dim` real
/// Riemann coordinates to `states`. Points on a front take the right state.
///
/// # Safety
/// `xs` must hold `n` values and `states` room for `n * dim`.
#[no_mangle]
pub unsafe extern "C" fn wf_trajectory_sample(traj: *const WfTrajectory, t: f64, xs: *const f64, n: usize, states: *mut f64) -> WfStatus {
    guard(|| {
        let tr = &deref(traj)?.0;
        let xs = slice(xs, n)?;
        if n > 0 && states.is_null() {
            return Err(null());
        }
        let profile = tr.profile_at(t)?;
        let dim = tr.model().dim();
        for (k, x) in xs.iter().enumerate() {
            let w = tr.grid().to_real(profile.at(*x));
            ptr::copy_nonoverlapping(w.as_ptr(), states.add(k * dim), dim);
        }
        Ok(())
    })
}

/// Writes the interaction log as CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn wf_trajectory_write_event_log(traj: *const WfTrajectory, path: *const c_char) -> WfStatus {
    guard(|| {
        let tr = &deref(traj)?.0;
        let mut buf = Vec::new();
        tr.write_event_log(&mut buf)?;
        std::fs::write(str_arg(path)?, buf).map_err(Error::from)?;
        Ok(())
    })
}

/// Runs a TOML scenario and writes its artifacts into `out_dir`; the number
/// of invariant violations goes to `violations`.
///
/// # Safety
/// Strings must be NUL-terminated and `violations` valid.
#[no_mangle]
pub unsafe extern "C" fn wf_scenario_run(path: *const c_char, out_dir: *const c_char, violations: *mut usize) -> WfStatus {
    guard(|| {
        let scenario = Scenario::load(Path::new(str_arg(path)?))?;
        let art = lab::run(&scenario)?;
        art.write(Path::new(str_arg(out_dir)?))?;
        write(violations, art.metrics.violations)
    })
}
