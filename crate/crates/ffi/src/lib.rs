//! C ABI over the qdsim library.
//!
//! Every fallible call returns a [`QdsimStatus`]. On failure the message is
//! kept per thread and can be copied out with [`qdsim_last_error`]. Handles
//! are opaque and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use num_complex::Complex64;
use qdsim::eigen::{solve_bound_states, BasisSpec};
use qdsim::potential::{embed_in_infinite_well, PiecewisePotential, Shape};
use qdsim::scenario::{emit_outputs, run_scenario, ScenarioConfig, ScenarioOutput};
use qdsim::tightbinding::{propagate, TBSchedule};
use qdsim::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QdsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Bad input or config; the message names the field.
    Validation = 3,
    /// A solver failed at run time.
    Runtime = 4,
    Io = 5,
    /// Output buffer too small; the required size was still reported.
    BufferTooSmall = 6,
    Panic = 7,
}

/// A parsed scenario file.
pub struct QdsimScenario {
    config: ScenarioConfig,
}

/// Results of one scenario run.
pub struct QdsimRun {
    output: ScenarioOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> QdsimStatus {
    if e.is_validation() {
        QdsimStatus::Validation
    } else if matches!(e, Error::Io { .. }) {
        QdsimStatus::Io
    } else {
        QdsimStatus::Runtime
    }
}

fn guard(f: impl FnOnce() -> Result<(), QdsimStatus>) -> QdsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            QdsimStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside qdsim");
            QdsimStatus::Panic
        }
    }
}

fn lib<T>(r: qdsim::Result<T>) -> Result<T, QdsimStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), QdsimStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        Err(QdsimStatus::NullPointer)
    } else {
        Ok(())
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, QdsimStatus> {
    non_null(p, what)?;
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not UTF-8"));
        QdsimStatus::InvalidUtf8
    })
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], QdsimStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// Copies `src` into `buf` if it fits and always reports the needed length.
unsafe fn copy_out<T: Copy>(
    src: &[T],
    buf: *mut T,
    cap: usize,
    needed: *mut usize,
) -> Result<(), QdsimStatus> {
    if !needed.is_null() {
        *needed = src.len();
    }
    if src.len() > cap {
        set_error(format!("buffer holds {cap}, need {}", src.len()));
        return Err(QdsimStatus::BufferTooSmall);
    }
    if !src.is_empty() {
        non_null(buf, "output buffer")?;
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qdsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread, NUL-terminated, into
/// `buf`. Returns the message length without the terminator; nothing is
/// written when `cap` is too small.
///
/// # Safety
/// `buf` must be valid for `cap` bytes or null with `cap == 0`.
#[no_mangle]
pub unsafe extern "C" fn qdsim_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let n = e.len();
        if !buf.is_null() && cap > n {
            ptr::copy_nonoverlapping(e.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        n
    })
}

/// Parses a scenario from JSON text. Relative paths inside it resolve
/// against `base_dir`, which may be null.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qdsim_scenario_from_json(
    json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut QdsimScenario,
) -> QdsimStatus {
    guard(|| {
        non_null(out, "out")?;
        let text = str_arg(json, "json")?;
        let mut config = lib(ScenarioConfig::from_json(text))?;
        if !base_dir.is_null() {
            config.base_dir = Some(str_arg(base_dir, "base_dir")?.into());
        }
        *out = Box::into_raw(Box::new(QdsimScenario { config }));
        Ok(())
    })
}

/// Reads a scenario file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qdsim_scenario_from_path(
    path: *const c_char,
    out: *mut *mut QdsimScenario,
) -> QdsimStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = str_arg(path, "path")?;
        let config = lib(ScenarioConfig::from_path(Path::new(path)))?;
        *out = Box::into_raw(Box::new(QdsimScenario { config }));
        Ok(())
    })
}

/// Replaces the master seed.
///
/// # Safety
/// `s` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn qdsim_scenario_set_seed(s: *mut QdsimScenario, seed: u64) -> QdsimStatus {
    guard(|| {
        non_null(s, "scenario")?;
        (*s).config.seed = Some(seed);
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qdsim_scenario_free(s: *mut QdsimScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Runs the scenario without writing files.
///
/// # Safety
/// `s` must be a live scenario handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qdsim_scenario_run(
    s: *const QdsimScenario,
    out: *mut *mut QdsimRun,
) -> QdsimStatus {
    guard(|| {
        non_null(s, "scenario")?;
        non_null(out, "out")?;
        let output = lib(run_scenario(&(*s).config))?;
        *out = Box::into_raw(Box::new(QdsimRun { output }));
        Ok(())
    })
}

/// Writes the run's files into `out_dir`, or the configured directory when
/// `out_dir` is null.
///
/// # Safety
/// `r` must be a live run handle; `out_dir` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn qdsim_run_emit(r: *mut QdsimRun, out_dir: *const c_char) -> QdsimStatus {
    guard(|| {
        non_null(r, "run")?;
        let run = &mut *r;
        if !out_dir.is_null() {
            run.output.scenario.output.dir = str_arg(out_dir, "out_dir")?.into();
        }
        lib(emit_outputs(&mut run.output))?;
        Ok(())
    })
}

/// Number of bound states, or 0 when the run had no eigen stage.
///
/// # Safety
/// `r` must be a live run handle or null.
#[no_mangle]
pub unsafe extern "C" fn qdsim_run_n_bound(r: *const QdsimRun) -> usize {
    if r.is_null() {
        return 0;
    }
    (*r).output.report.eigen.as_ref().map_or(0, |e| e.n_bound)
}

/// Final dot probabilities of the SOM run (`solver == 0`) or the TB run
/// (`solver == 1`), one per dot.
///
/// # Safety
/// `r` must be a live run handle; `buf` valid for `cap` doubles; `needed`
/// null or writable.
#[no_mangle]
pub unsafe extern "C" fn qdsim_run_final_probabilities(
    r: *const QdsimRun,
    solver: u32,
    buf: *mut f64,
    cap: usize,
    needed: *mut usize,
) -> QdsimStatus {
    guard(|| {
        non_null(r, "run")?;
        let out = &(*r).output;
        let probs: Option<Vec<f64>> = match solver {
            0 => out.som.as_ref().and_then(|s| s.dot_probs.last().cloned()),
            1 => out
                .tb
                .as_ref()
                .map(|t| t.final_amplitudes().iter().map(|c| c.norm_sqr()).collect()),
            _ => {
                set_error("solver must be 0 (SOM) or 1 (TB)");
                return Err(QdsimStatus::Validation);
            }
        };
        let Some(probs) = probs else {
            set_error("this run has no trace for that solver");
            return Err(QdsimStatus::Validation);
        };
        copy_out(&probs, buf, cap, needed)
    })
}

/// The run report as JSON, NUL-terminated. `needed` receives the length
/// including the terminator.
///
/// # Safety
/// `r` must be a live run handle; `buf` valid for `cap` bytes; `needed`
/// null or writable.
#[no_mangle]
pub unsafe extern "C" fn qdsim_run_report_json(
    r: *const QdsimRun,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> QdsimStatus {
    guard(|| {
        non_null(r, "run")?;
        let mut text = serde_json::to_string(&(*r).output.report).expect("report serializes");
        text.push('\0');
        copy_out(text.as_bytes(), buf.cast(), cap, needed)
    })
}

/// # Safety
/// `r` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qdsim_run_free(r: *mut QdsimRun) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Bound energies in `E0` of a piecewise-constant potential with
/// `n_values + 1` breakpoints, placed `margin` from the left wall of a box of
/// width `length`, in an `n_basis` sine basis.
///
/// # Safety
/// Array arguments must be valid for their lengths; `needed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn qdsim_piecewise_spectrum(
    breakpoints: *const f64,
    values: *const f64,
    n_values: usize,
    margin: f64,
    length: f64,
    n_basis: usize,
    energies: *mut f64,
    cap: usize,
    needed: *mut usize,
) -> QdsimStatus {
    guard(|| {
        let bp = slice_arg(breakpoints, n_values + 1, "breakpoints")?;
        let vals = slice_arg(values, n_values, "values")?;
        let inner = lib(PiecewisePotential::build(
            bp.to_vec(),
            vals.to_vec(),
            Shape::Constant,
            0.0,
        ))?;
        let p = lib(embed_in_infinite_well(inner, margin, length))?;
        let basis = lib(BasisSpec::new(n_basis, length))?;
        let sol = lib(solve_bound_states(&p, &basis, None))?;
        copy_out(sol.bound_energies(), energies, cap, needed)
    })
}

/// Evolves a chain with constant hoppings (`n_sites - 1` of them, in `E0`)
/// for `horizon` (in `t0`) and writes the final site probabilities into
/// `probs` (`n_sites` doubles). The initial amplitudes must be normalized.
///
/// # Safety
/// Array arguments must be valid for the lengths implied by `n_sites`.
#[no_mangle]
pub unsafe extern "C" fn qdsim_tb_evolve(
    n_sites: usize,
    hoppings: *const f64,
    initial_re: *const f64,
    initial_im: *const f64,
    horizon: f64,
    probs: *mut f64,
) -> QdsimStatus {
    guard(|| {
        if n_sites == 0 {
            set_error("at least one site is needed");
            return Err(QdsimStatus::Validation);
        }
        let h = slice_arg(hoppings, n_sites - 1, "hoppings")?;
        let re = slice_arg(initial_re, n_sites, "initial_re")?;
        let im = slice_arg(initial_im, n_sites, "initial_im")?;
        non_null(probs, "probs")?;
        let c0: Vec<Complex64> = re
            .iter()
            .zip(im)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        let sched = lib(TBSchedule::new(n_sites, h, Vec::new()))?;
        let trace = lib(propagate(&c0, &sched, horizon, horizon.max(1e-300)))?;
        let p: Vec<f64> = trace
            .final_amplitudes()
            .iter()
            .map(|c| c.norm_sqr())
            .collect();
        copy_out(&p, probs, n_sites, ptr::null_mut())
    })
}
