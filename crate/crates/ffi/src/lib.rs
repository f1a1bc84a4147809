//! C ABI for the waterladder solver.
//!
//! Problems travel as JSON in the `waterladder/1` schema; handles are opaque
//! pointers owned by this library and freed through the matching `_free`
//! functions. Every fallible call returns a [`wl_status`]; on failure a
//! human-readable message is kept in thread-local storage and can be fetched
//! with [`wl_last_error_message`].
//!
//! The generated header lands in `include/waterladder.h`.

#![allow(non_camel_case_types)]

use std::cell::RefCell;
use std::ffi::{CStr, CString, c_char};
use std::ptr;

use waterladder::cli::{ProblemFile, SolutionFile};
use waterladder::solver::{SolveError, SolverOptions, solve};
use waterladder::verify::kkt_check;
use waterladder::{Problem, Solution};

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message).unwrap_or_else(|_| CString::new("invalid message").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// Status codes; nonzero values match the CLI exit codes where they overlap.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum wl_status {
    WL_OK = 0,
    WL_INFEASIBLE = 2,
    WL_INVALID_INPUT = 3,
    WL_INTERNAL_ERROR = 4,
    WL_NULL_POINTER = 5,
    WL_BUFFER_TOO_SMALL = 6,
}

/// Opaque problem handle.
pub struct wl_problem {
    inner: Problem,
}

/// Opaque solution handle.
pub struct wl_solution {
    problem: Problem,
    inner: Solution,
}

/// Solver options; obtain defaults from [`wl_solver_options_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct wl_solver_options {
    /// Nonzero enables the equation-skipping rule (default on).
    pub skip_rule: i32,
    /// Nonzero settles the last constrained variable directly (default off).
    pub final_shortcut: i32,
    /// Relative residual tolerance of the inner root solve.
    pub eps_root: f64,
    /// Relative tolerance for tied candidate multipliers.
    pub eps_tie: f64,
}

/// Verification residuals and verdict; see the solver documentation for the
/// residual definitions.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct wl_kkt_report {
    pub stationarity_residual: f64,
    pub monotone_violation: f64,
    pub primal_violation: f64,
    pub comp_slack_constraints: f64,
    pub comp_slack_boxes: f64,
    /// Nonzero when every residual is inside tolerance.
    pub pass: i32,
}

fn status_of(err: &SolveError) -> wl_status {
    match err {
        SolveError::Infeasible { .. } => wl_status::WL_INFEASIBLE,
        SolveError::Reduce(_) | SolveError::Problem(_) => wl_status::WL_INVALID_INPUT,
        SolveError::Kernel(_) | SolveError::Internal(_) => wl_status::WL_INTERNAL_ERROR,
    }
}

/// Default solver options.
#[unsafe(no_mangle)]
pub extern "C" fn wl_solver_options_default() -> wl_solver_options {
    let d = SolverOptions::default();
    wl_solver_options {
        skip_rule: d.skip_rule as i32,
        final_shortcut: d.final_shortcut as i32,
        eps_root: d.eps_root,
        eps_tie: d.eps_tie,
    }
}

/// Parses a problem from `waterladder/1` JSON.
///
/// # Safety
/// `json` must point to a NUL-terminated string and `out` to writable
/// storage for one pointer. On success `*out` owns the problem and must be
/// released with [`wl_problem_free`].
#[unsafe(no_mangle)]
pub unsafe extern "C" fn wl_problem_from_json(
    json: *const c_char,
    out: *mut *mut wl_problem,
) -> wl_status {
    if json.is_null() || out.is_null() {
        set_error("null argument".into());
        return wl_status::WL_NULL_POINTER;
    }
    unsafe { *out = ptr::null_mut() };
    let text = match unsafe { CStr::from_ptr(json) }.to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("problem JSON is not valid UTF-8".into());
            return wl_status::WL_INVALID_INPUT;
        }
    };
    let parsed = ProblemFile::from_json(text).and_then(|f| f.to_problem());
    match parsed {
        Ok(p) => {
            clear_error();
            unsafe { *out = Box::into_raw(Box::new(wl_problem { inner: p })) };
            wl_status::WL_OK
        }
        Err(e) => {
            set_error(e.to_string());
            wl_status::WL_INVALID_INPUT
        }
    }
}

/// Releases a problem handle; a null pointer is ignored.
///
/// # Safety
/// `p` must come from [`wl_problem_from_json`] and not have been freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn wl_problem_free(p: *mut wl_problem) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Number of variables of the problem.
///
/// # Safety
/// `p` must be a live handle.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn wl_problem_len(p: *const wl_problem) -> usize {
    if p.is_null() { 0 } else { unsafe { &*p }.inner.len() }
}

/// Solves the problem. `opts` may be null for defaults.
///
/// # Safety
/// `p` must be a live problem handle, `out` writable storage for one
/// pointer. On success `*out` owns the solution.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn wl_solve(
    p: *const wl_problem,
    opts: *const wl_solver_options,
    out: *mut *mut wl_solution,
) -> wl_status {
    if p.is_null() || out.is_null() {
        set_error("null argument".into());
        return wl_status::WL_NULL_POINTER;
    }
    unsafe { *out = ptr::null_mut() };
    let problem = &unsafe { &*p }.inner;
    let options = if opts.is_null() {
        SolverOptions::default()
    } else {
        let o = unsafe { &*opts };
        SolverOptions {
            skip_rule: o.skip_rule != 0,
            final_shortcut: o.final_shortcut != 0,
            eps_root: o.eps_root,
            eps_tie: o.eps_tie,
        }
    };
    // Panics must not unwind across the C boundary. The closure only reads
    // the problem, so resuming after a caught panic is sound.
    let outcome =
        std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| solve(problem, &options)));
    match outcome {
        Ok(Ok(sol)) => {
            clear_error();
            let handle = wl_solution { problem: problem.clone(), inner: sol };
            unsafe { *out = Box::into_raw(Box::new(handle)) };
            wl_status::WL_OK
        }
        Ok(Err(e)) => {
            let status = status_of(&e);
            set_error(e.to_string());
            status
        }
        Err(_) => {
            set_error("solver panicked".into());
            wl_status::WL_INTERNAL_ERROR
        }
    }
}

/// Releases a solution handle; a null pointer is ignored.
///
/// # Safety
/// `s` must come from [`wl_solve`] and not have been freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn wl_solution_free(s: *mut wl_solution) {
    if !s.is_null() {
        drop(unsafe { Box::from_raw(s) });
    }
}

/// Number of variables of the solution.
///
/// # Safety
/// `s` must be a live handle.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn wl_solution_len(s: *const wl_solution) -> usize {
    if s.is_null() { 0 } else { unsafe { &*s }.inner.x_star.len() }
}

unsafe fn copy_vec(src: &[f64], buf: *mut f64, len: usize) -> wl_status {
    if buf.is_null() {
        set_error("null buffer".into());
        return wl_status::WL_NULL_POINTER;
    }
    if len < src.len() {
        set_error(format!("buffer holds {len} values, need {}", src.len()));
        return wl_status::WL_BUFFER_TOO_SMALL;
    }
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len()) };
    clear_error();
    wl_status::WL_OK
}

/// Copies the optimal point into `buf` (`len` entries available).
///
/// # Safety
/// `s` must be a live handle and `buf` writable for `len` doubles.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn wl_solution_x(
    s: *const wl_solution,
    buf: *mut f64,
    len: usize,
) -> wl_status {
    if s.is_null() {
        set_error("null solution".into());
        return wl_status::WL_NULL_POINTER;
    }
    unsafe { copy_vec(&(*s).inner.x_star, buf, len) }
}

/// Copies the prefix multipliers into `buf`.
///
/// # Safety
/// As for [`wl_solution_x`].
#[unsafe(no_mangle)]
pub unsafe extern "C" fn wl_solution_sigma(
    s: *const wl_solution,
    buf: *mut f64,
    len: usize,
) -> wl_status {
    if s.is_null() {
        set_error("null solution".into());
        return wl_status::WL_NULL_POINTER;
    }
    unsafe { copy_vec(&(*s).inner.sigma_star, buf, len) }
}

/// Copies the upper-bound multipliers into `buf`.
///
/// # Safety
/// As for [`wl_solution_x`].
#[unsafe(no_mangle)]
pub unsafe extern "C" fn wl_solution_nu(
    s: *const wl_solution,
    buf: *mut f64,
    len: usize,
) -> wl_status {
    if s.is_null() {
        set_error("null solution".into());
        return wl_status::WL_NULL_POINTER;
    }
    unsafe { copy_vec(&(*s).inner.nu_star, buf, len) }
}

/// Copies the lower-bound multipliers into `buf`.
///
/// # Safety
/// As for [`wl_solution_x`].
#[unsafe(no_mangle)]
pub unsafe extern "C" fn wl_solution_kappa(
    s: *const wl_solution,
    buf: *mut f64,
    len: usize,
) -> wl_status {
    if s.is_null() {
        set_error("null solution".into());
        return wl_status::WL_NULL_POINTER;
    }
    unsafe { copy_vec(&(*s).inner.kappa_star, buf, len) }
}

/// Outer iterations performed by the sweep.
///
/// # Safety
/// `s` must be a live handle.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn wl_solution_iterations(s: *const wl_solution) -> usize {
    if s.is_null() { 0 } else { unsafe { &*s }.inner.iterations }
}

/// Number of multiplier blocks in the trace.
///
/// # Safety
/// `s` must be a live handle.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn wl_solution_trace_len(s: *const wl_solution) -> usize {
    if s.is_null() { 0 } else { unsafe { &*s }.inner.trace.len() }
}

/// Copies the trace into `mu_buf`/`k_buf` (`len` entries each). Block ends
/// are 1-based variable indices.
///
/// # Safety
/// `s` must be a live handle and both buffers writable for `len` entries.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn wl_solution_trace(
    s: *const wl_solution,
    mu_buf: *mut f64,
    k_buf: *mut usize,
    len: usize,
) -> wl_status {
    if s.is_null() || mu_buf.is_null() || k_buf.is_null() {
        set_error("null argument".into());
        return wl_status::WL_NULL_POINTER;
    }
    let trace = &unsafe { &*s }.inner.trace;
    if len < trace.len() {
        set_error(format!("buffer holds {len} blocks, need {}", trace.len()));
        return wl_status::WL_BUFFER_TOO_SMALL;
    }
    for (i, b) in trace.iter().enumerate() {
        unsafe {
            *mu_buf.add(i) = b.mu;
            *k_buf.add(i) = b.k;
        }
    }
    clear_error();
    wl_status::WL_OK
}

/// Serializes the solution (without a verification report) to JSON. The
/// returned string must be released with [`wl_string_free`].
///
/// # Safety
/// `s` must be a live handle and `out` writable storage for one pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn wl_solution_to_json(
    s: *const wl_solution,
    out: *mut *mut c_char,
) -> wl_status {
    if s.is_null() || out.is_null() {
        set_error("null argument".into());
        return wl_status::WL_NULL_POINTER;
    }
    unsafe { *out = ptr::null_mut() };
    let file = SolutionFile::new(&unsafe { &*s }.inner, None);
    match serde_json::to_string(&file) {
        Ok(json) => match CString::new(json) {
            Ok(c) => {
                clear_error();
                unsafe { *out = c.into_raw() };
                wl_status::WL_OK
            }
            Err(_) => {
                set_error("serialized JSON contained a NUL byte".into());
                wl_status::WL_INTERNAL_ERROR
            }
        },
        Err(e) => {
            set_error(e.to_string());
            wl_status::WL_INTERNAL_ERROR
        }
    }
}

/// Runs the independent optimality check of a solution against a problem.
///
/// # Safety
/// `p` and `s` must be live handles and `out` writable storage for one
/// report.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn wl_kkt_check(
    p: *const wl_problem,
    s: *const wl_solution,
    tol: f64,
    out: *mut wl_kkt_report,
) -> wl_status {
    if p.is_null() || s.is_null() || out.is_null() {
        set_error("null argument".into());
        return wl_status::WL_NULL_POINTER;
    }
    let report = kkt_check(&unsafe { &*p }.inner, &unsafe { &*s }.inner, tol);
    unsafe {
        *out = wl_kkt_report {
            stationarity_residual: report.stationarity_residual,
            monotone_violation: report.monotone_violation,
            primal_violation: report.primal_violation,
            comp_slack_constraints: report.comp_slack_constraints,
            comp_slack_boxes: report.comp_slack_boxes,
            pass: report.pass as i32,
        };
    }
    clear_error();
    wl_status::WL_OK
}

/// Verifies the solution against the problem it was solved from, avoiding a
/// second problem handle.
///
/// # Safety
/// `s` must be a live handle and `out` writable storage for one report.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn wl_solution_kkt(
    s: *const wl_solution,
    tol: f64,
    out: *mut wl_kkt_report,
) -> wl_status {
    if s.is_null() || out.is_null() {
        set_error("null argument".into());
        return wl_status::WL_NULL_POINTER;
    }
    let handle = unsafe { &*s };
    let report = kkt_check(&handle.problem, &handle.inner, tol);
    unsafe {
        *out = wl_kkt_report {
            stationarity_residual: report.stationarity_residual,
            monotone_violation: report.monotone_violation,
            primal_violation: report.primal_violation,
            comp_slack_constraints: report.comp_slack_constraints,
            comp_slack_boxes: report.comp_slack_boxes,
            pass: report.pass as i32,
        };
    }
    clear_error();
    wl_status::WL_OK
}

/// Copy of the last error message on this thread, or null when the previous
/// call succeeded. Release with [`wl_string_free`].
#[unsafe(no_mangle)]
pub extern "C" fn wl_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(msg) => msg.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Releases a string returned by this library; a null pointer is ignored.
///
/// # Safety
/// `s` must have been returned by this library and not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn wl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
