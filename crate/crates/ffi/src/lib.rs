//! C interface to the cylscale CT problems and solvers.
//!
//! Every function returns a [`CsStatus`]. On failure the message is kept per
//! thread and can be read with [`cs_last_error`]. Handles are opaque and must
//! be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cylscale::ct::{make_problem, CtProblem, ProblemKind};
use cylscale::error::Error;
use cylscale::experiment::{problem_scaling, solve_problem, ExperimentConfig, ProblemSection, SolverName, SolverSection};
use cylscale::model::Objective;
use cylscale::scaling::ScalingOp;
use cylscale::solvers::{SolveResult, SolveStatus};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Config = 4,
    DegenerateScaling = 5,
    Numerical = 6,
    Io = 7,
    Internal = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsProblemKind {
    Quadratic = 0,
    Recon = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsSolver {
    Lbfgsb = 0,
    Tron = 1,
    Spg = 2,
}

/// How a solve ended.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsSolveState {
    Converged = 0,
    Stalled = 1,
    MaxIter = 2,
    TimeLimit = 3,
    NumericalFailure = 4,
}

/// Solver choice and stopping rules. Non-positive numbers mean "use the default".
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CsSolveOptions {
    pub solver: CsSolver,
    pub scaled: bool,
    pub max_iter: usize,
    pub pg_rtol: f64,
    pub max_time: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CsSummary {
    pub state: CsSolveState,
    pub iterations: usize,
    pub final_f: f64,
    pub pg_ratio: f64,
    pub cg_total: usize,
    pub wall_time: f64,
}

/// A CT problem together with its lazily built scaling operator.
pub struct CsProblem {
    problem: CtProblem,
    kind: ProblemKind,
    scaling: Option<ScalingOp>,
}

pub struct CsResult {
    result: SolveResult,
    summary: CsSummary,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn code(e: &Error) -> CsStatus {
    match e {
        Error::Dimension { .. } => CsStatus::Dimension,
        Error::Config(_) | Error::Format(_) => CsStatus::Config,
        Error::DegenerateScaling { .. } => CsStatus::DegenerateScaling,
        Error::NotDescent(_) | Error::UnboundedModel => CsStatus::Numerical,
        Error::Io(_) => CsStatus::Io,
        Error::Internal(_) => CsStatus::Internal,
    }
}

struct Failure(CsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(code(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CsStatus::NullPointer, format!("{what} is null"))
}

/// Run `body`, translating errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CsStatus::Panic
        }
    }
}

fn build(section: &ProblemSection) -> Result<Box<CsProblem>, Failure> {
    let problem = make_problem(&section.to_spec())?;
    Ok(Box::new(CsProblem {
        problem,
        kind: section.kind,
        scaling: None,
    }))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Defaults: unscaled TRON with the problem's default tolerance.
#[no_mangle]
pub extern "C" fn cs_solve_options_default() -> CsSolveOptions {
    CsSolveOptions {
        solver: CsSolver::Tron,
        scaled: false,
        max_iter: 0,
        pg_rtol: 0.0,
        max_time: 0.0,
    }
}

/// Build a synthetic problem on an `n_r × n_theta` polar grid with `n_det`
/// detectors per view. A negative `noise_seed` gives noiseless data.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn cs_problem_new(
    kind: CsProblemKind,
    n_r: usize,
    n_theta: usize,
    n_det: usize,
    noise_seed: i64,
    out: *mut *mut CsProblem,
) -> CsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mut section = ProblemSection::new(match kind {
            CsProblemKind::Quadratic => ProblemKind::Quadratic,
            CsProblemKind::Recon => ProblemKind::Recon,
        });
        section.n_r = n_r;
        section.n_theta = n_theta;
        section.n_det = n_det;
        section.noise_seed = u64::try_from(noise_seed).ok();
        let p = build(&section)?;
        unsafe { *out = Box::into_raw(p) };
        Ok(())
    })
}

/// Build the problem described by the `[problem]` table of an experiment
/// config in TOML. The `[solver]` table is validated but otherwise ignored.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_problem_from_toml(toml: *const c_char, out: *mut *mut CsProblem) -> CsStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = unsafe { CStr::from_ptr(toml) }
            .to_str()
            .map_err(|e| Failure(CsStatus::InvalidArgument, format!("config is not UTF-8: {e}")))?;
        let cfg = ExperimentConfig::parse(text)?;
        let p = build(&cfg.problem)?;
        unsafe { *out = Box::into_raw(p) };
        Ok(())
    })
}

/// # Safety
/// `problem` must come from `cs_problem_new` or `cs_problem_from_toml`, or be null.
#[no_mangle]
pub unsafe extern "C" fn cs_problem_free(problem: *mut CsProblem) {
    if !problem.is_null() {
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Number of unknowns, or 0 for a null handle.
///
/// # Safety
/// `problem` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cs_problem_dim(problem: *const CsProblem) -> usize {
    unsafe { problem.as_ref() }.map_or(0, |p| p.problem.model.dim())
}

/// Objective value at `x` (length `n`). The gradient is written to `grad`
/// when it is not null.
///
/// # Safety
/// `x` must hold `n` values, `f` must be writable and `grad`, if not null, must
/// have room for `n` values.
#[no_mangle]
pub unsafe extern "C" fn cs_problem_eval(
    problem: *const CsProblem,
    x: *const f64,
    n: usize,
    f: *mut f64,
    grad: *mut f64,
) -> CsStatus {
    guard(|| {
        let p = unsafe { problem.as_ref() }.ok_or_else(|| null("problem"))?;
        if x.is_null() {
            return Err(null("x"));
        }
        if f.is_null() {
            return Err(null("f"));
        }
        let model = &p.problem.model;
        if n != model.dim() {
            return Err(Error::Dimension {
                context: "cs_problem_eval",
                expected: model.dim(),
                got: n,
            }
            .into());
        }
        let x = unsafe { std::slice::from_raw_parts(x, n) };
        if grad.is_null() {
            unsafe { *f = model.eval_f(x) };
        } else {
            let (fv, g) = model.eval_f_grad(x);
            unsafe {
                *f = fv;
                std::slice::from_raw_parts_mut(grad, n).copy_from_slice(&g);
            }
        }
        Ok(())
    })
}

/// Solve from the problem's default starting point.
///
/// # Safety
/// `problem` must be a live handle, `options` null or valid, and `out` a valid
/// pointer. The problem handle must not be used from another thread meanwhile.
#[no_mangle]
pub unsafe extern "C" fn cs_solve(
    problem: *mut CsProblem,
    options: *const CsSolveOptions,
    out: *mut *mut CsResult,
) -> CsStatus {
    guard(|| {
        let p = unsafe { problem.as_mut() }.ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let opts = unsafe { options.as_ref() }.copied().unwrap_or_else(|| cs_solve_options_default());
        let name = match opts.solver {
            CsSolver::Lbfgsb => SolverName::Lbfgsb,
            CsSolver::Tron => SolverName::Tron,
            CsSolver::Spg => SolverName::Spg,
        };
        let mut section = SolverSection::new(name, opts.scaled);
        section.max_iter = (opts.max_iter > 0).then_some(opts.max_iter);
        section.pg_rtol = (opts.pg_rtol > 0.0).then_some(opts.pg_rtol);
        section.max_time = (opts.max_time > 0.0).then_some(opts.max_time);
        let cfg = section.solver_config(p.kind);
        cfg.validate()?;
        if opts.scaled && p.scaling.is_none() {
            p.scaling = Some(problem_scaling(&p.problem)?);
        }
        let run = solve_problem(&p.problem, &section, &cfg, p.scaling.as_ref())?;
        let s = &run.summary;
        let summary = CsSummary {
            state: match s.status {
                SolveStatus::Converged => CsSolveState::Converged,
                SolveStatus::Stalled => CsSolveState::Stalled,
                SolveStatus::MaxIter => CsSolveState::MaxIter,
                SolveStatus::TimeLimit => CsSolveState::TimeLimit,
                SolveStatus::NumericalFailure => CsSolveState::NumericalFailure,
            },
            iterations: s.iterations,
            final_f: s.final_f,
            pg_ratio: s.pg_ratio,
            cg_total: s.cg_total,
            wall_time: s.wall_time,
        };
        let r = Box::new(CsResult {
            result: run.result,
            summary,
        });
        unsafe { *out = Box::into_raw(r) };
        Ok(())
    })
}

/// # Safety
/// `result` must be a live handle and `summary` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_result_summary(result: *const CsResult, summary: *mut CsSummary) -> CsStatus {
    guard(|| {
        let r = unsafe { result.as_ref() }.ok_or_else(|| null("result"))?;
        if summary.is_null() {
            return Err(null("summary"));
        }
        unsafe { *summary = r.summary };
        Ok(())
    })
}

/// Copy the solution into `buf`, which must hold exactly `len` values.
///
/// # Safety
/// `result` must be a live handle and `buf` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn cs_result_x(result: *const CsResult, buf: *mut f64, len: usize) -> CsStatus {
    guard(|| {
        let r = unsafe { result.as_ref() }.ok_or_else(|| null("result"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let x = &r.result.x;
        if len != x.len() {
            return Err(Error::Dimension {
                context: "cs_result_x",
                expected: x.len(),
                got: len,
            }
            .into());
        }
        unsafe { std::slice::from_raw_parts_mut(buf, len) }.copy_from_slice(x);
        Ok(())
    })
}

/// Write the iteration trace as CSV to `path`.
///
/// # Safety
/// `result` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cs_result_write_trace(result: *const CsResult, path: *const c_char) -> CsStatus {
    guard(|| {
        let r = unsafe { result.as_ref() }.ok_or_else(|| null("result"))?;
        if path.is_null() {
            return Err(null("path"));
        }
        let path = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|e| Failure(CsStatus::InvalidArgument, format!("path is not UTF-8: {e}")))?;
        let file = std::fs::File::create(path).map_err(Error::from)?;
        r.result.trace.write_csv(file, None)?;
        Ok(())
    })
}

/// # Safety
/// `result` must come from `cs_solve`, or be null.
#[no_mangle]
pub unsafe extern "C" fn cs_result_free(result: *mut CsResult) {
    if !result.is_null() {
        drop(unsafe { Box::from_raw(result) });
    }
}
