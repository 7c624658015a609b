//! C interface to shearlab. Objects cross the boundary as opaque handles
//! that the caller releases with the matching `_free` function. Every
//! fallible call returns a `ShlStatus`; the message of the last failure on
//! the calling thread is available from `shl_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use shearlab::viscous::{run, SolverConfig};
use shearlab::{Error, InitialData, Layout, SpectralField, StageSchedule};

/// Status codes. Configuration, resolution and numerical failures use the
/// same values as the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShlStatus {
    Ok = 0,
    Config = 2,
    Resolution = 3,
    Numerical = 4,
    Io = 5,
    Parse = 6,
    NullArgument = 7,
    Panic = 8,
}

/// Opaque stage program.
pub struct ShlSchedule(StageSchedule);

/// Opaque spectral field.
pub struct ShlField(SpectralField);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ShlStatus {
    match e {
        Error::Config(_) => ShlStatus::Config,
        Error::Resolution(_) => ShlStatus::Resolution,
        Error::Numerical(_) => ShlStatus::Numerical,
        Error::Io(_) => ShlStatus::Io,
        Error::Parse(_) => ShlStatus::Parse,
    }
}

fn guard(f: impl FnOnce() -> Result<(), ShlStatus>) -> ShlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ShlStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside shearlab".into());
            ShlStatus::Panic
        }
    }
}

fn fail(e: Error) -> ShlStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> ShlStatus {
    set_error(format!("{what} is null"));
    ShlStatus::NullArgument
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, ShlStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not UTF-8"));
        ShlStatus::Parse
    })
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn shl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Universal program for `alpha` in (0, 1) truncated at `j_max`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn shl_schedule_universal(
    alpha: f64,
    j_max: u32,
    out: *mut *mut ShlSchedule,
) -> ShlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = StageSchedule::build_universal(alpha, j_max).map_err(fail)?;
        *out = boxed(ShlSchedule(s));
        Ok(())
    })
}

/// Parses the key-value schedule text.
///
/// # Safety
/// `text_ptr` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shl_schedule_from_text(
    text_ptr: *const c_char,
    out: *mut *mut ShlSchedule,
) -> ShlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let t = text(text_ptr, "text")?;
        let s = StageSchedule::from_text(t).map_err(fail)?;
        *out = boxed(ShlSchedule(s));
        Ok(())
    })
}

/// Number of stages including identity ones, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn shl_schedule_stage_count(s: *const ShlSchedule) -> usize {
    s.as_ref().map_or(0, |s| s.0.stages.len())
}

/// Key-value text of the schedule; release with `shl_string_free`.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn shl_schedule_to_text(s: *const ShlSchedule) -> *mut c_char {
    match s.as_ref() {
        Some(s) => CString::new(s.0.to_text()).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `s` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn shl_schedule_free(s: *mut ShlSchedule) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Initial data from a harmonic spec such as "sinsin:1,1". With a schedule
/// the field uses the storage layout that program needs, otherwise a plain grid.
///
/// # Safety
/// `spec` must be NUL-terminated, `schedule` null or live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn shl_field_harmonic(
    spec: *const c_char,
    nx: usize,
    ny: usize,
    schedule: *const ShlSchedule,
    out: *mut *mut ShlField,
) -> ShlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let data = InitialData::parse_harmonics(text(spec, "spec")?).map_err(fail)?;
        let layout = match schedule.as_ref() {
            Some(s) => Layout::for_program(nx, ny, &s.0, data.modes().iter().map(|m| (m.0, m.1))),
            None => Layout::plain(nx, ny),
        }
        .map_err(fail)?;
        let f = data.to_field(layout).map_err(fail)?;
        *out = boxed(ShlField(f));
        Ok(())
    })
}

/// Reads a binary field dump.
///
/// # Safety
/// `path` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn shl_field_load(path: *const c_char, out: *mut *mut ShlField) -> ShlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let f = SpectralField::load(Path::new(text(path, "path")?)).map_err(fail)?;
        *out = boxed(ShlField(f));
        Ok(())
    })
}

/// # Safety
/// `f` must be live; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn shl_field_save(f: *const ShlField, path: *const c_char) -> ShlStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("field"))?;
        f.0.save(Path::new(text(path, "path")?)).map_err(fail)
    })
}

/// L² norm on the torus.
///
/// # Safety
/// `f` must be null or live. Returns NaN for null.
#[no_mangle]
pub unsafe extern "C" fn shl_field_l2(f: *const ShlField) -> f64 {
    f.as_ref().map_or(f64::NAN, |f| f.0.l2())
}

/// Homogeneous Sobolev norm of order `s`.
///
/// # Safety
/// `f` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn shl_field_sobolev(f: *const ShlField, s: f64, out: *mut f64) -> ShlStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("field"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = f.0.sobolev(s).map_err(fail)?;
        Ok(())
    })
}

/// # Safety
/// `f` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn shl_field_free(f: *mut ShlField) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Viscous run along the program. Writes the terminal field, the
/// dissipation χ(T) and the largest energy-balance residual.
///
/// # Safety
/// `theta0` and `schedule` must be live; the out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn shl_run_viscous(
    theta0: *const ShlField,
    schedule: *const ShlSchedule,
    kappa: f64,
    substeps: usize,
    out_field: *mut *mut ShlField,
    out_chi: *mut f64,
    out_residual: *mut f64,
) -> ShlStatus {
    guard(|| {
        let f = theta0.as_ref().ok_or_else(|| null("theta0"))?;
        let s = schedule.as_ref().ok_or_else(|| null("schedule"))?;
        if out_field.is_null() || out_chi.is_null() || out_residual.is_null() {
            return Err(null("output pointer"));
        }
        let cfg = SolverConfig::new(kappa, substeps, f.0.nx(), f.0.ny());
        let o = run(&f.0, &s.0, &cfg).map_err(fail)?;
        *out_chi = o.ledger.chi();
        *out_residual = o.ledger.max_residual();
        *out_field = boxed(ShlField(o.field));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn shl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
