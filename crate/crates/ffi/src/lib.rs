//! C interface to the ttmg solver.
//!
//! Every fallible function returns a [`TtmgStatus`]. On failure the message
//! is kept per thread and can be read with [`ttmg_last_error_message`].
//! Objects are opaque and released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ttmg::hierarchy::{build_hierarchy, GridHierarchy, HierarchyOptions, Interpolation, Strategy};
use ttmg::models::{KanbanParams, Model, OverflowParams};
use ttmg::solver::{MultigridSolver, SolveReport, SolverConfig};
use ttmg::tt::TtVector;
use ttmg::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TtmgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SizeLimit = 3,
    Numerical = 4,
    /// The solve finished without reaching its tolerance. The solution
    /// handle is still written.
    NotConverged = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TtmgFamily {
    Overflow = 0,
    Kanban = 1,
}

/// Solver settings exposed through the C interface. Obtain defaults with
/// [`ttmg_solver_options_default`] and edit individual fields.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TtmgSolverOptions {
    pub tolerance: f64,
    pub max_cycles: usize,
    pub nu1: usize,
    pub nu2: usize,
    pub initial_max_rank: usize,
    pub rank_limit: usize,
    /// Nonzero selects Gauss-Seidel, zero selects GMRES.
    pub gauss_seidel: u8,
}

pub struct TtmgModel {
    model: Model,
}

pub struct TtmgHierarchy {
    h: GridHierarchy,
}

pub struct TtmgSolution {
    x: TtVector,
    report: SolveReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TtmgStatus {
    match e {
        Error::SizeLimit { .. } => TtmgStatus::SizeLimit,
        Error::Numerical(_) => TtmgStatus::Numerical,
        _ => TtmgStatus::InvalidArgument,
    }
}

fn fail(status: TtmgStatus, msg: impl Into<String>) -> TtmgStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<TtmgStatus, Error>) -> TtmgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(e)) => fail(status_of(&e), e.to_string()),
        Err(_) => fail(TtmgStatus::Panic, "internal panic"),
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize) -> Option<&'a [T]> {
    if len == 0 {
        Some(&[])
    } else if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(p, len))
    }
}

fn boxed<T>(value: T, out: *mut *mut T) {
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length without
/// the terminator, or 0 when no error was recorded.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn ttmg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Overflow network with `queues` queues of `capacity` each and the standard
/// rates `lambda_i = max(1.2 - 0.1 i, 0.1)`, `mu_i = 1`.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn ttmg_overflow_new(queues: usize, capacity: usize, out: *mut *mut TtmgModel) -> TtmgStatus {
    if out.is_null() {
        return fail(TtmgStatus::NullPointer, "out is null");
    }
    guard(|| {
        let p = OverflowParams::standard(queues, capacity);
        p.validate()?;
        boxed(TtmgModel { model: Model::Overflow(p) }, out);
        Ok(TtmgStatus::Ok)
    })
}

/// Overflow network with explicit per-queue capacities and rates, each
/// array of length `queues`.
///
/// # Safety
/// The arrays must hold `queues` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ttmg_overflow_new_with_rates(
    queues: usize,
    capacities: *const usize,
    arrival_rates: *const f64,
    service_rates: *const f64,
    out: *mut *mut TtmgModel,
) -> TtmgStatus {
    let (Some(caps), Some(lam), Some(mu)) =
        (slice(capacities, queues), slice(arrival_rates, queues), slice(service_rates, queues))
    else {
        return fail(TtmgStatus::NullPointer, "rate or capacity array is null");
    };
    if out.is_null() {
        return fail(TtmgStatus::NullPointer, "out is null");
    }
    guard(|| {
        let p = OverflowParams::new(caps.to_vec(), lam.to_vec(), mu.to_vec())?;
        boxed(TtmgModel { model: Model::Overflow(p) }, out);
        Ok(TtmgStatus::Ok)
    })
}

/// Kanban line of `machines` machines with `tickets` tickets each and
/// uniform processing and transfer rates.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn ttmg_kanban_new(
    machines: usize,
    tickets: usize,
    processing_rate: f64,
    transfer_rate: f64,
    out: *mut *mut TtmgModel,
) -> TtmgStatus {
    if out.is_null() {
        return fail(TtmgStatus::NullPointer, "out is null");
    }
    guard(|| {
        let p = KanbanParams::uniform(machines, tickets, processing_rate, transfer_rate);
        p.validate()?;
        boxed(TtmgModel { model: Model::Kanban(p) }, out);
        Ok(TtmgStatus::Ok)
    })
}

/// Number of states, or 0 for a null handle. Saturates at `SIZE_MAX`.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ttmg_model_state_count(model: *const TtmgModel) -> usize {
    match model.as_ref() {
        None => 0,
        Some(m) => m.model.dims().iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).unwrap_or(usize::MAX),
    }
}

/// Number of subsystems (queues or machines), or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ttmg_model_order(model: *const TtmgModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.dims().len())
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ttmg_model_free(model: *mut TtmgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Builds the level hierarchy with the family's coarsening rule, stopping
/// once a level has at most `coarsest_max` states.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ttmg_hierarchy_build(
    model: *const TtmgModel,
    coarsest_max: usize,
    out: *mut *mut TtmgHierarchy,
) -> TtmgStatus {
    let Some(m) = model.as_ref() else {
        return fail(TtmgStatus::NullPointer, "model is null");
    };
    if out.is_null() {
        return fail(TtmgStatus::NullPointer, "out is null");
    }
    guard(|| {
        let op = m.model.operator()?;
        let strategy = match m.model {
            Model::Overflow(_) => Strategy::Overflow { interpolation: Interpolation::Direct },
            Model::Kanban(_) => Strategy::Kanban,
        };
        let options = HierarchyOptions { coarsest_max, ..HierarchyOptions::default() };
        let h = build_hierarchy(&op, strategy, &options)?;
        boxed(TtmgHierarchy { h }, out);
        Ok(TtmgStatus::Ok)
    })
}

/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ttmg_hierarchy_num_levels(h: *const TtmgHierarchy) -> usize {
    h.as_ref().map_or(0, |h| h.h.num_levels())
}

/// Number of states on `level` (0 is the finest).
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ttmg_hierarchy_level_size(h: *const TtmgHierarchy, level: usize, out: *mut usize) -> TtmgStatus {
    let Some(h) = h.as_ref() else {
        return fail(TtmgStatus::NullPointer, "hierarchy is null");
    };
    if out.is_null() {
        return fail(TtmgStatus::NullPointer, "out is null");
    }
    match h.h.levels.get(level) {
        None => fail(TtmgStatus::InvalidArgument, format!("level {level} out of range")),
        Some(l) => {
            *out = l.size();
            TtmgStatus::Ok
        }
    }
}

/// # Safety
/// `h` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ttmg_hierarchy_free(h: *mut TtmgHierarchy) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

fn config_for(family: TtmgFamily) -> SolverConfig {
    match family {
        TtmgFamily::Overflow => SolverConfig::default(),
        TtmgFamily::Kanban => SolverConfig::gauss_seidel(),
    }
}

#[no_mangle]
pub extern "C" fn ttmg_solver_options_default(family: TtmgFamily) -> TtmgSolverOptions {
    let c = config_for(family);
    TtmgSolverOptions {
        tolerance: c.tolerance,
        max_cycles: c.max_cycles,
        nu1: c.nu1,
        nu2: c.nu2,
        initial_max_rank: c.initial_max_rank,
        rank_limit: c.rank_limit,
        gauss_seidel: u8::from(family == TtmgFamily::Kanban),
    }
}

fn apply_options(o: &TtmgSolverOptions) -> SolverConfig {
    let family = if o.gauss_seidel != 0 { TtmgFamily::Kanban } else { TtmgFamily::Overflow };
    SolverConfig {
        tolerance: o.tolerance,
        max_cycles: o.max_cycles,
        nu1: o.nu1,
        nu2: o.nu2,
        initial_max_rank: o.initial_max_rank,
        rank_limit: o.rank_limit,
        ..config_for(family)
    }
}

/// Runs multigrid V-cycles until `||A x|| < tolerance` or the cycle limit.
/// A null `options` uses the defaults of the model family. Writes the
/// solution handle on `Ok` and on `NotConverged`.
///
/// # Safety
/// `h` must be a live handle, `options` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ttmg_solve(
    h: *const TtmgHierarchy,
    options: *const TtmgSolverOptions,
    out: *mut *mut TtmgSolution,
) -> TtmgStatus {
    let Some(h) = h.as_ref() else {
        return fail(TtmgStatus::NullPointer, "hierarchy is null");
    };
    if out.is_null() {
        return fail(TtmgStatus::NullPointer, "out is null");
    }
    let options = options.as_ref().copied();
    guard(|| {
        let cfg = match options {
            Some(o) => apply_options(&o),
            None if is_kanban(&h.h) => config_for(TtmgFamily::Kanban),
            None => config_for(TtmgFamily::Overflow),
        };
        let solver = MultigridSolver::new(&h.h, cfg)?;
        let (x, report) = solver.solve()?;
        let converged = report.converged();
        let residual = report.final_residual;
        boxed(TtmgSolution { x, report }, out);
        if converged {
            Ok(TtmgStatus::Ok)
        } else {
            Ok(fail(TtmgStatus::NotConverged, format!("stopped with residual {residual:.3e}")))
        }
    })
}

fn is_kanban(h: &GridHierarchy) -> bool {
    h.strategy == Strategy::Kanban
}

/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ttmg_solution_residual(s: *const TtmgSolution) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.report.final_residual)
}

/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ttmg_solution_cycles(s: *const TtmgSolution) -> usize {
    s.as_ref().map_or(0, |s| s.report.iterations())
}

/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ttmg_solution_converged(s: *const TtmgSolution) -> bool {
    s.as_ref().is_some_and(|s| s.report.converged())
}

/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ttmg_solution_max_rank(s: *const TtmgSolution) -> usize {
    s.as_ref().map_or(0, |s| s.x.max_rank())
}

/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ttmg_solution_effective_rank(s: *const TtmgSolution) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.x.effective_rank())
}

/// Probability of the state with multi-index `index[0..order]`.
///
/// # Safety
/// `index` must hold `order` elements and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ttmg_solution_entry(
    s: *const TtmgSolution,
    index: *const usize,
    order: usize,
    out: *mut f64,
) -> TtmgStatus {
    let Some(s) = s.as_ref() else {
        return fail(TtmgStatus::NullPointer, "solution is null");
    };
    let Some(idx) = slice(index, order) else {
        return fail(TtmgStatus::NullPointer, "index is null");
    };
    if out.is_null() {
        return fail(TtmgStatus::NullPointer, "out is null");
    }
    guard(|| {
        *out = s.x.entry(idx)?;
        Ok(TtmgStatus::Ok)
    })
}

/// Writes the full probability vector (mode 1 slowest) into `buf`, which
/// must hold exactly the number of states.
///
/// # Safety
/// `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ttmg_solution_to_dense(s: *const TtmgSolution, buf: *mut f64, len: usize) -> TtmgStatus {
    let Some(s) = s.as_ref() else {
        return fail(TtmgStatus::NullPointer, "solution is null");
    };
    if buf.is_null() {
        return fail(TtmgStatus::NullPointer, "buffer is null");
    }
    guard(|| {
        let n = s.x.full_len();
        if n != len {
            return Ok(fail(TtmgStatus::InvalidArgument, format!("buffer holds {len} values, need {n}")));
        }
        let full = s.x.to_full_limited(len)?;
        ptr::copy_nonoverlapping(full.as_ptr(), buf, len);
        Ok(TtmgStatus::Ok)
    })
}

/// # Safety
/// `s` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ttmg_solution_free(s: *mut TtmgSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}
