//! C ABI over the stacklab core.
//!
//! Every function returns a [`StacklabStatus`]; results come back through
//! out-parameters. Panics are caught at the boundary and reported as
//! `STACKLAB_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use stacklab::preference::{best_achievable, levenshtein};
use stacklab::scenario::{sample_scenario, GenConfig};
use stacklab::sim::enumerate_stacks;
use stacklab::{parse_plan, Error, PhysParams, PreferenceSet, Scenario, StackCatalog};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StacklabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Infeasible = 4,
    Parse = 5,
    Io = 6,
    Internal = 7,
}

/// Opaque scenario handle.
pub struct StacklabScenario(Scenario);

/// Opaque catalog of stable stacks.
pub struct StacklabCatalog(StackCatalog);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(e: &Error) -> StacklabStatus {
    match e {
        Error::Parse(_) => StacklabStatus::Parse,
        Error::GenExhausted { .. } | Error::NoStableStack(_) => StacklabStatus::Infeasible,
        Error::Io { .. } | Error::Json { .. } | Error::Csv { .. } => StacklabStatus::Io,
        _ => StacklabStatus::InvalidInput,
    }
}

struct Fail(StacklabStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> StacklabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            StacklabStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            StacklabStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(StacklabStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(StacklabStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(StacklabStatus::NullPointer, format!("{name} is null")))
}

fn check_out<T>(p: *mut T, name: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(StacklabStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("nul bytes removed")
        .into_raw()
}

fn split_ids(s: &str) -> Vec<&str> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .collect()
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn stacklab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn stacklab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn stacklab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a scenario from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stacklab_scenario_from_json(
    json: *const c_char,
    out: *mut *mut StacklabScenario,
) -> StacklabStatus {
    guard(|| {
        check_out(out, "out")?;
        let s = Scenario::from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(StacklabScenario(s)));
        Ok(())
    })
}

/// Samples scenario `index` of the default generator with `master_seed`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stacklab_scenario_generate(
    master_seed: u64,
    index: u64,
    out: *mut *mut StacklabScenario,
) -> StacklabStatus {
    guard(|| {
        check_out(out, "out")?;
        let cfg = GenConfig {
            master_seed,
            ..GenConfig::default()
        };
        *out = Box::into_raw(Box::new(StacklabScenario(sample_scenario(&cfg, index)?)));
        Ok(())
    })
}

/// # Safety
/// `s` must be a live scenario handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stacklab_scenario_to_json(
    s: *const StacklabScenario,
    out: *mut *mut c_char,
) -> StacklabStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = c_string(ref_arg(s, "scenario")?.0.to_json());
        Ok(())
    })
}

/// # Safety
/// `s` must be a live scenario handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stacklab_scenario_box_count(
    s: *const StacklabScenario,
    out: *mut usize,
) -> StacklabStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = ref_arg(s, "scenario")?.0.len();
        Ok(())
    })
}

/// Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn stacklab_scenario_free(s: *mut StacklabScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Simulates every stacking order with the default physics parameters.
///
/// # Safety
/// `s` must be a live scenario handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stacklab_catalog_enumerate(
    s: *const StacklabScenario,
    out: *mut *mut StacklabCatalog,
) -> StacklabStatus {
    guard(|| {
        check_out(out, "out")?;
        let c = enumerate_stacks(&ref_arg(s, "scenario")?.0, &PhysParams::default())?;
        *out = Box::into_raw(Box::new(StacklabCatalog(c)));
        Ok(())
    })
}

/// Number of completed stable stacks.
///
/// # Safety
/// `c` must be a live catalog handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stacklab_catalog_completed_count(
    c: *const StacklabCatalog,
    out: *mut usize,
) -> StacklabStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = ref_arg(c, "catalog")?.0.completed.len();
        Ok(())
    })
}

/// Best stable stack for comma-separated preferences such as
/// `"weight,size"`. The stack is written bottom-to-top as `"box3,box2,box1"`.
///
/// # Safety
/// `c` must be a live catalog handle, `prefs` NUL-terminated, and both
/// out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn stacklab_catalog_best(
    c: *const StacklabCatalog,
    prefs: *const c_char,
    out_stack: *mut *mut c_char,
    out_score: *mut f64,
) -> StacklabStatus {
    guard(|| {
        check_out(out_stack, "out_stack")?;
        check_out(out_score, "out_score")?;
        let prefs: PreferenceSet = str_arg(prefs, "prefs")?.parse()?;
        let (stack, score) = best_achievable(&ref_arg(c, "catalog")?.0, &prefs)?;
        *out_stack = c_string(stack.join(","));
        *out_score = score;
        Ok(())
    })
}

/// # Safety
/// `c` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn stacklab_catalog_free(c: *mut StacklabCatalog) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Edit distance between two comma-separated id sequences.
///
/// # Safety
/// `a` and `b` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stacklab_levenshtein(
    a: *const c_char,
    b: *const c_char,
    out: *mut usize,
) -> StacklabStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = levenshtein(&split_ids(str_arg(a, "a")?), &split_ids(str_arg(b, "b")?));
        Ok(())
    })
}

/// Parses plan text and writes its canonical rendering, e.g.
/// `"stack box2, stack box1"` becomes `"stack box2; stack box1"`.
///
/// # Safety
/// `text` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stacklab_parse_plan(
    text: *const c_char,
    out: *mut *mut c_char,
) -> StacklabStatus {
    guard(|| {
        check_out(out, "out")?;
        *out = c_string(
            parse_plan(str_arg(text, "text")?)
                .map_err(Error::from)?
                .to_string(),
        );
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn error_is_cleared_on_success() {
        let mut n = 0;
        let st = unsafe { stacklab_levenshtein(ptr::null(), c"a".as_ptr(), &mut n) };
        assert_eq!(st, StacklabStatus::NullPointer);
        let msg = unsafe { CStr::from_ptr(stacklab_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "a is null");
        let st = unsafe { stacklab_levenshtein(c"x,y".as_ptr(), c"y,x".as_ptr(), &mut n) };
        assert_eq!((st, n), (StacklabStatus::Ok, 2));
        assert!(unsafe { CStr::from_ptr(stacklab_last_error()) }.is_empty());
    }
}
