//! C interface to the packshift robust runner.
//!
//! A runner is created from a JSON configuration and fed events one trace
//! line at a time. Every function returns a [`PsStatus`]; on failure the
//! message is available from [`ps_last_error`] on the same thread. Strings
//! handed out by the library must be released with [`ps_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use packshift::harness::SolutionFile;
use packshift::trace::parse_event;
use packshift::{PackError, RobustRunner, RunnerConfig};

/// Result codes of every exported function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON or trace line.
    Parse = 3,
    /// Rejected configuration.
    Config = 4,
    /// Event inconsistent with the trace so far, or an unsupported item.
    Input = 5,
    /// Offline repacking or another internal step failed.
    Internal = 6,
    Panic = 7,
}

/// Opaque runner handle.
pub struct PsRunner {
    inner: RobustRunner,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &PackError) -> PsStatus {
    match err {
        PackError::Parse(_) => PsStatus::Parse,
        PackError::Config(_) => PsStatus::Config,
        PackError::InvalidItem { .. }
        | PackError::Trace { .. }
        | PackError::Dimension { .. }
        | PackError::Unsupported { .. }
        | PackError::TooLarge { .. } => PsStatus::Input,
        PackError::NotPlaced(_) | PackError::Offline(_) | PackError::UndefinedFactor => PsStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into a status and the last error.
fn guard(f: impl FnOnce() -> Result<(), (PsStatus, String)>) -> PsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside packshift");
            PsStatus::Panic
        }
    }
}

fn pack_err(e: PackError) -> (PsStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, (PsStatus, String)> {
    if s.is_null() {
        return Err((PsStatus::NullPointer, "null string argument".into()));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| (PsStatus::InvalidUtf8, e.to_string()))
}

unsafe fn write_out(out: *mut *mut c_char, value: String) -> Result<(), (PsStatus, String)> {
    if out.is_null() {
        return Err((PsStatus::NullPointer, "null output pointer".into()));
    }
    let s = CString::new(value).map_err(|e| (PsStatus::Internal, e.to_string()))?;
    *out = s.into_raw();
    Ok(())
}

unsafe fn runner_ref<'a>(r: *const PsRunner) -> Result<&'a PsRunner, (PsStatus, String)> {
    r.as_ref().ok_or((PsStatus::NullPointer, "null runner".into()))
}

/// Creates a runner from a JSON configuration such as
/// `{"epsilon":"1/10","online":{"name":"shelf-2d"},"check":true}`.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_runner_new(config_json: *const c_char, out: *mut *mut PsRunner) -> PsStatus {
    guard(|| {
        if out.is_null() {
            return Err((PsStatus::NullPointer, "null output pointer".into()));
        }
        let text = read_str(config_json)?;
        let config: RunnerConfig = serde_json::from_str(text).map_err(|e| (PsStatus::Parse, e.to_string()))?;
        let inner = RobustRunner::new(config).map_err(pack_err)?;
        *out = Box::into_raw(Box::new(PsRunner { inner }));
        Ok(())
    })
}

/// Releases a runner. Accepts null.
///
/// # Safety
/// `runner` must come from [`ps_runner_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ps_runner_free(runner: *mut PsRunner) {
    if !runner.is_null() {
        drop(Box::from_raw(runner));
    }
}

/// Applies one event, given as a trace line, and writes the step
/// diagnostics as a JSON object to `out`.
///
/// # Safety
/// `runner` must be live, `event_json` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ps_runner_step(
    runner: *mut PsRunner,
    event_json: *const c_char,
    out: *mut *mut c_char,
) -> PsStatus {
    guard(|| {
        let runner = runner.as_mut().ok_or((PsStatus::NullPointer, "null runner".into()))?;
        let event = parse_event(read_str(event_json)?).map_err(pack_err)?;
        let diag = runner.inner.step(&event).map_err(pack_err)?;
        write_out(out, diag.to_json_line())
    })
}

/// Writes the current cost, ghosts included, as `"p/q"`.
///
/// # Safety
/// `runner` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ps_runner_cost(runner: *const PsRunner, out: *mut *mut c_char) -> PsStatus {
    guard(|| {
        let runner = runner_ref(runner)?;
        write_out(out, runner.inner.solution().cost().to_string())
    })
}

/// Writes the current solution as JSON.
///
/// # Safety
/// `runner` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ps_runner_solution(runner: *const PsRunner, out: *mut *mut c_char) -> PsStatus {
    guard(|| {
        let runner = runner_ref(runner)?;
        let file = SolutionFile::from_solution(runner.inner.solution());
        let json = serde_json::to_string(&file).map_err(|e| (PsStatus::Internal, e.to_string()))?;
        write_out(out, json)
    })
}

/// Number of monitor violations recorded so far.
///
/// # Safety
/// `runner` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ps_runner_violations(runner: *const PsRunner, out: *mut usize) -> PsStatus {
    guard(|| {
        let runner = runner_ref(runner)?;
        if out.is_null() {
            return Err((PsStatus::NullPointer, "null output pointer".into()));
        }
        *out = runner.inner.violations().len();
        Ok(())
    })
}

/// Releases a string returned by this library. Accepts null.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ps_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn ps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
