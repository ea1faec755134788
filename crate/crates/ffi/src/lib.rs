//! C ABI over `uihpq_core`.
//!
//! Objects cross the boundary as opaque handles (`UihpqMap`, `UihpqReport`)
//! created by `uihpq_*` constructors and released by the matching `*_free`.
//! Every fallible call returns an `i32` status (`UIHPQ_OK` or one of the
//! `UIHPQ_ERR_*` codes) and writes results through out-pointers; the text of
//! the last error on the calling thread is available from
//! `uihpq_last_error`. Panics never unwind into C: they become
//! `UIHPQ_ERR_PANIC`.
//!
//! Variable-length outputs use a caller buffer: `needed` receives the full
//! length (including the NUL for strings); a null `buf` only queries it, and
//! a too-small `cap` returns `UIHPQ_ERR_BUFFER_TOO_SMALL` without writing.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use uihpq_core::bdg::{uihpq_ball, Center, LabelTails};
use uihpq_core::boltzmann::sample_boltzmann;
use uihpq_core::lab::{cmd_sample, run, Command, ExperimentConfig, StatsReport};
use uihpq_core::planar_map::{map_from_str, map_to_string};
use uihpq_core::rng::Stream;
use uihpq_core::{Error, HalfEdgeMap};

pub const UIHPQ_OK: i32 = 0;
/// A required pointer argument was null.
pub const UIHPQ_ERR_NULL: i32 = 1;
/// A string argument was not valid UTF-8, or a parameter was out of range.
pub const UIHPQ_ERR_INVALID_ARGUMENT: i32 = 2;
/// Malformed `.pmap` text or JSON configuration.
pub const UIHPQ_ERR_PARSE: i32 = 3;
/// The input does not describe a valid map.
pub const UIHPQ_ERR_INVALID_MAP: i32 = 4;
/// A sampler hit its size, attempt or enumeration cap.
pub const UIHPQ_ERR_BUDGET: i32 = 5;
/// The output buffer is smaller than `needed`.
pub const UIHPQ_ERR_BUFFER_TOO_SMALL: i32 = 6;
/// Any other library error.
pub const UIHPQ_ERR_INTERNAL: i32 = 7;
/// A Rust panic was caught at the boundary.
pub const UIHPQ_ERR_PANIC: i32 = 8;

/// A rooted planar map.
pub struct UihpqMap {
    map: HalfEdgeMap,
}

/// An experiment report.
pub struct UihpqReport {
    report: StatsReport,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn code_of(e: &Error) -> i32 {
    match e {
        Error::Parse(_) => UIHPQ_ERR_PARSE,
        Error::InvalidMap(_) | Error::NonSimplePiece(_) | Error::MalformedLooptree(_) | Error::PerimeterMismatch { .. } => {
            UIHPQ_ERR_INVALID_MAP
        }
        Error::OutOfRange(_) | Error::DimensionMismatch(_) => UIHPQ_ERR_INVALID_ARGUMENT,
        Error::SizeCapExceeded(_) | Error::MaxAttemptsExceeded { .. } | Error::BudgetExceeded(_) => UIHPQ_ERR_BUDGET,
        _ => UIHPQ_ERR_INTERNAL,
    }
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), i32>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UIHPQ_OK,
        Ok(Err(code)) => code,
        Err(_) => {
            set_error("panic inside uihpq".into());
            UIHPQ_ERR_PANIC
        }
    }
}

fn lib<T>(r: uihpq_core::Result<T>) -> Result<T, i32> {
    r.map_err(|e| {
        set_error(e.to_string());
        code_of(&e)
    })
}

fn fail(code: i32, msg: &str) -> i32 {
    set_error(msg.into());
    code
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, i32> {
    if s.is_null() {
        return Err(fail(UIHPQ_ERR_NULL, &format!("{what} is null")));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(UIHPQ_ERR_INVALID_ARGUMENT, &format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<(), i32> {
    if out.is_null() {
        return Err(fail(UIHPQ_ERR_NULL, "output pointer is null"));
    }
    *out = v;
    Ok(())
}

unsafe fn map_ref<'a>(m: *const UihpqMap) -> Result<&'a HalfEdgeMap, i32> {
    m.as_ref().map(|h| &h.map).ok_or_else(|| fail(UIHPQ_ERR_NULL, "map handle is null"))
}

unsafe fn report_ref<'a>(r: *const UihpqReport) -> Result<&'a StatsReport, i32> {
    r.as_ref().map(|h| &h.report).ok_or_else(|| fail(UIHPQ_ERR_NULL, "report handle is null"))
}

/// Copies `bytes` (plus a NUL when `nul`) into the caller buffer.
unsafe fn write_buf(bytes: &[u8], nul: bool, buf: *mut u8, cap: usize, needed: *mut usize) -> Result<(), i32> {
    let len = bytes.len() + usize::from(nul);
    put(needed, len)?;
    if buf.is_null() {
        return Ok(());
    }
    if cap < len {
        return Err(fail(UIHPQ_ERR_BUFFER_TOO_SMALL, "buffer too small"));
    }
    ptr::copy_nonoverlapping(bytes.as_ptr(), buf, bytes.len());
    if nul {
        *buf.add(bytes.len()) = 0;
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn uihpq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread.
///
/// # Safety
/// `buf` must be null or valid for `cap` bytes; `needed` must be valid.
#[no_mangle]
pub unsafe extern "C" fn uihpq_last_error(buf: *mut c_char, cap: usize, needed: *mut usize) -> i32 {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    guard(|| write_buf(msg.as_bytes(), true, buf.cast(), cap, needed))
}

/// Boltzmann quadrangulation of perimeter `2 sigma` at skewness `p`, drawn
/// from the stream of `seed`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn uihpq_sample_boltzmann(sigma: u32, p: f64, seed: u64, out: *mut *mut UihpqMap) -> i32 {
    guard(|| {
        if sigma == 0 || !(0.0..=0.5).contains(&p) {
            return Err(fail(UIHPQ_ERR_INVALID_ARGUMENT, "need sigma >= 1 and p in [0, 1/2]"));
        }
        let q = lib(sample_boltzmann(sigma as usize, p, &mut Stream::new(seed).rng(), 1_000_000))?;
        put(out, Box::into_raw(Box::new(UihpqMap { map: q.map })))
    })
}

/// Ball of radius `radius` around the root vertex of the UIHPQ_p.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn uihpq_sample_ball(p: f64, radius: u32, seed: u64, out: *mut *mut UihpqMap) -> i32 {
    guard(|| {
        if !(0.0..0.5).contains(&p) {
            return Err(fail(UIHPQ_ERR_INVALID_ARGUMENT, "need p in [0, 1/2)"));
        }
        let tails = LabelTails::new(p);
        let b = lib(uihpq_ball(&tails, radius as usize, Center::Root, &mut Stream::new(seed).rng()))?;
        put(out, Box::into_raw(Box::new(UihpqMap { map: b.map })))
    })
}

/// Parses `.pmap` text; the map must be valid.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn uihpq_map_from_pmap(text: *const c_char, out: *mut *mut UihpqMap) -> i32 {
    guard(|| {
        let m = lib(map_from_str(str_arg(text, "text")?))?;
        if !m.is_valid() {
            return Err(fail(UIHPQ_ERR_INVALID_MAP, "map fails validation"));
        }
        put(out, Box::into_raw(Box::new(UihpqMap { map: m })))
    })
}

/// Releases a map; null is ignored.
///
/// # Safety
/// `m` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uihpq_map_free(m: *mut UihpqMap) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Numbers of half-edges, vertices and faces (outer face included).
///
/// # Safety
/// `m` must be a live handle; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn uihpq_map_counts(
    m: *const UihpqMap,
    half_edges: *mut usize,
    vertices: *mut usize,
    faces: *mut usize,
) -> i32 {
    guard(|| {
        let m = map_ref(m)?;
        put(half_edges, m.num_half_edges())?;
        put(vertices, m.num_vertices())?;
        put(faces, m.num_faces())
    })
}

/// Number of half-edges on the outer face (`2 sigma` for perimeter `2 sigma`).
///
/// # Safety
/// `m` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn uihpq_map_perimeter(m: *const UihpqMap, out: *mut usize) -> i32 {
    guard(|| {
        let m = map_ref(m)?;
        put(out, m.boundary().len())
    })
}

/// Writes 1 if the outer face is a simple cycle, else 0.
///
/// # Safety
/// `m` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn uihpq_map_is_simple_boundary(m: *const UihpqMap, out: *mut i32) -> i32 {
    guard(|| {
        let m = map_ref(m)?;
        put(out, i32::from(m.is_simple_boundary()))
    })
}

/// `.pmap` text of the map, NUL-terminated.
///
/// # Safety
/// `m` must be a live handle; `buf` null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn uihpq_map_to_pmap(m: *const UihpqMap, buf: *mut c_char, cap: usize, needed: *mut usize) -> i32 {
    guard(|| {
        let s = map_to_string(map_ref(m)?);
        write_buf(s.as_bytes(), true, buf.cast(), cap, needed)
    })
}

/// Canonical encoding bytes: equal iff the rooted maps are isomorphic.
///
/// # Safety
/// `m` must be a live handle; `buf` null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn uihpq_map_canonical_encoding(m: *const UihpqMap, buf: *mut u8, cap: usize, needed: *mut usize) -> i32 {
    guard(|| {
        let e = map_ref(m)?.canonical_encoding();
        write_buf(&e, false, buf, cap, needed)
    })
}

/// Runs a CLI command (`"verify"`, `"prefix-law"`, …). `config_json` is null
/// or a JSON object with any of the config fields (`seed`, `p`, `n`, `sigma`,
/// `radius`, `samples`, `tolerance`, `length`, `grid`, `modes`, `extra`).
///
/// # Safety
/// `command` must be a NUL-terminated string, `config_json` null or one;
/// `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn uihpq_run(command: *const c_char, config_json: *const c_char, out: *mut *mut UihpqReport) -> i32 {
    guard(|| {
        let cmd = lib(Command::parse(str_arg(command, "command")?))?;
        let cfg: ExperimentConfig = if config_json.is_null() {
            ExperimentConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json, "config")?)
                .map_err(|e| fail(UIHPQ_ERR_PARSE, &format!("config: {e}")))?
        };
        let report = if cmd == Command::Sample { lib(cmd_sample(&cfg))?.0 } else { lib(run(cmd, &cfg))? };
        put(out, Box::into_raw(Box::new(UihpqReport { report })))
    })
}

/// Writes 1 if every check of the report passed, else 0.
///
/// # Safety
/// `r` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn uihpq_report_pass(r: *const UihpqReport, out: *mut i32) -> i32 {
    guard(|| {
        let r = report_ref(r)?;
        put(out, i32::from(r.pass))
    })
}

/// JSON text of the report, NUL-terminated.
///
/// # Safety
/// `r` must be a live handle; `buf` null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn uihpq_report_json(r: *const UihpqReport, buf: *mut c_char, cap: usize, needed: *mut usize) -> i32 {
    guard(|| {
        let s = report_ref(r)?.to_json();
        write_buf(s.as_bytes(), true, buf.cast(), cap, needed)
    })
}

/// CSV text of the report (one line per check), NUL-terminated.
///
/// # Safety
/// `r` must be a live handle; `buf` null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn uihpq_report_csv(r: *const UihpqReport, buf: *mut c_char, cap: usize, needed: *mut usize) -> i32 {
    guard(|| {
        let s = report_ref(r)?.to_csv();
        write_buf(s.as_bytes(), true, buf.cast(), cap, needed)
    })
}

/// Releases a report; null is ignored.
///
/// # Safety
/// `r` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uihpq_report_free(r: *mut UihpqReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
