//! C ABI over the solver: opaque handles, status codes and a thread-local
//! error message.
//!
//! Every function returns a [`FomdpStatus`]. On failure the message is
//! available from [`fomdp_last_error`] until the next call on the same
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fomdp_core::basisgen::{generate_basis, BasisGenConfig, SolverKind};
use fomdp_core::fomdp::{parse_domain, parse_instance, FomdpModel, Instance, LinearValueFunction};
use fomdp_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FomdpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Syntax or model error in a domain or instance.
    Domain = 3,
    /// LP infeasible, unbounded or numerically unstable.
    Solver = 4,
    /// Index or argument out of range.
    OutOfRange = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FomdpSolver {
    Foalp = 0,
    Foapi = 1,
}

/// A parsed domain.
pub struct FomdpModelHandle {
    model: FomdpModel,
}

/// A parsed instance, tied to the model it was parsed against.
pub struct FomdpInstanceHandle {
    inst: Instance,
}

/// A weighted basis produced by basis generation.
pub struct FomdpSolutionHandle {
    lvf: LinearValueFunction,
    converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FomdpStatus {
    if e.is_solver_failure() {
        FomdpStatus::Solver
    } else {
        FomdpStatus::Domain
    }
}

/// Runs `f`, recording its error and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (FomdpStatus, String)>) -> FomdpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FomdpStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(msg);
            FomdpStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (FomdpStatus, String) {
    (status_of(&e), e.to_string())
}

fn null() -> (FomdpStatus, String) {
    (FomdpStatus::NullPointer, "null pointer argument".into())
}

/// # Safety
/// `p` is null or a valid nul-terminated string.
unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, (FomdpStatus, String)> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (FomdpStatus::InvalidUtf8, e.to_string()))
}

/// # Safety
/// `p` is null or points to a live handle created by this library.
unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, (FomdpStatus, String)> {
    p.as_ref().ok_or_else(null)
}

fn out<T>(p: *mut T) -> Result<(), (FomdpStatus, String)> {
    if p.is_null() {
        Err(null())
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn fomdp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a domain.
///
/// # Safety
/// `text` is a nul-terminated string; `out_model` is writable.
#[no_mangle]
pub unsafe extern "C" fn fomdp_model_parse(text_ptr: *const c_char, out_model: *mut *mut FomdpModelHandle) -> FomdpStatus {
    guard(|| {
        out(out_model)?;
        let model = parse_domain(text(text_ptr)?).map_err(core_err)?;
        model.validate().map_err(core_err)?;
        *out_model = Box::into_raw(Box::new(FomdpModelHandle { model }));
        Ok(())
    })
}

/// # Safety
/// `model` is null or was returned by `fomdp_model_parse` and not freed.
#[no_mangle]
pub unsafe extern "C" fn fomdp_model_free(model: *mut FomdpModelHandle) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of action templates, including noop.
///
/// # Safety
/// `model` is a live handle; `out_count` is writable.
#[no_mangle]
pub unsafe extern "C" fn fomdp_model_num_templates(model: *const FomdpModelHandle, out_count: *mut usize) -> FomdpStatus {
    guard(|| {
        out(out_count)?;
        *out_count = handle(model)?.model.templates.len();
        Ok(())
    })
}

/// Parses an instance against a model.
///
/// # Safety
/// `model` is a live handle; `text` is a nul-terminated string;
/// `out_inst` is writable.
#[no_mangle]
pub unsafe extern "C" fn fomdp_instance_parse(
    model: *const FomdpModelHandle,
    text_ptr: *const c_char,
    out_inst: *mut *mut FomdpInstanceHandle,
) -> FomdpStatus {
    guard(|| {
        out(out_inst)?;
        let m = handle(model)?;
        let inst = parse_instance(text(text_ptr)?, &m.model).map_err(core_err)?;
        *out_inst = Box::into_raw(Box::new(FomdpInstanceHandle { inst }));
        Ok(())
    })
}

/// # Safety
/// `inst` is null or was returned by `fomdp_instance_parse` and not freed.
#[no_mangle]
pub unsafe extern "C" fn fomdp_instance_free(inst: *mut FomdpInstanceHandle) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Generates a basis with at most `iters` solver calls and solves for its
/// weights.
///
/// # Safety
/// `model` is a live handle; `out_sol` is writable.
#[no_mangle]
pub unsafe extern "C" fn fomdp_solve(
    model: *const FomdpModelHandle,
    solver: FomdpSolver,
    iters: usize,
    tau: f64,
    out_sol: *mut *mut FomdpSolutionHandle,
) -> FomdpStatus {
    guard(|| {
        out(out_sol)?;
        let m = handle(model)?;
        if iters == 0 || !tau.is_finite() || tau < 0.0 {
            return Err((FomdpStatus::OutOfRange, format!("iters {iters}, tau {tau}")));
        }
        let cfg = BasisGenConfig {
            tau,
            max_iters: iters,
            solver: match solver {
                FomdpSolver::Foalp => SolverKind::Foalp,
                FomdpSolver::Foapi => SolverKind::Foapi,
            },
            ..Default::default()
        };
        let rep = generate_basis(&m.model, &cfg).map_err(|f| core_err(f.error))?;
        *out_sol = Box::into_raw(Box::new(FomdpSolutionHandle {
            lvf: rep.lvf,
            converged: rep.solve.converged,
        }));
        Ok(())
    })
}

/// # Safety
/// `sol` is null or was returned by `fomdp_solve` and not freed.
#[no_mangle]
pub unsafe extern "C" fn fomdp_solution_free(sol: *mut FomdpSolutionHandle) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// # Safety
/// `sol` is a live handle; `out_count` is writable.
#[no_mangle]
pub unsafe extern "C" fn fomdp_solution_num_bases(sol: *const FomdpSolutionHandle, out_count: *mut usize) -> FomdpStatus {
    guard(|| {
        out(out_count)?;
        *out_count = handle(sol)?.lvf.len();
        Ok(())
    })
}

/// # Safety
/// `sol` is a live handle; `out_weight` is writable.
#[no_mangle]
pub unsafe extern "C" fn fomdp_solution_weight(
    sol: *const FomdpSolutionHandle,
    index: usize,
    out_weight: *mut f64,
) -> FomdpStatus {
    guard(|| {
        out(out_weight)?;
        let s = handle(sol)?;
        *out_weight = *s
            .lvf
            .weights
            .get(index)
            .ok_or_else(|| (FomdpStatus::OutOfRange, format!("basis {index} of {}", s.lvf.len())))?;
        Ok(())
    })
}

/// Whether the solver reported convergence (always true for FOALP).
///
/// # Safety
/// `sol` is a live handle; `out_flag` is writable.
#[no_mangle]
pub unsafe extern "C" fn fomdp_solution_converged(sol: *const FomdpSolutionHandle, out_flag: *mut bool) -> FomdpStatus {
    guard(|| {
        out(out_flag)?;
        *out_flag = handle(sol)?.converged;
        Ok(())
    })
}

/// Value of the solution in the instance's initial state.
///
/// # Safety
/// `sol` and `inst` are live handles; `out_value` is writable.
#[no_mangle]
pub unsafe extern "C" fn fomdp_solution_value(
    sol: *const FomdpSolutionHandle,
    inst: *const FomdpInstanceHandle,
    out_value: *mut f64,
) -> FomdpStatus {
    guard(|| {
        out(out_value)?;
        let s = handle(sol)?;
        let i = handle(inst)?;
        *out_value = s.lvf.eval(&i.inst.init).map_err(core_err)?;
        Ok(())
    })
}

/// `weight<TAB>formula` per basis. Release with `fomdp_string_free`.
///
/// # Safety
/// `sol` is a live handle; `out_text` is writable.
#[no_mangle]
pub unsafe extern "C" fn fomdp_solution_dump(sol: *const FomdpSolutionHandle, out_text: *mut *mut c_char) -> FomdpStatus {
    guard(|| {
        out(out_text)?;
        let dump = handle(sol)?.lvf.dump().replace('\0', " ");
        *out_text = CString::new(dump).expect("no interior nul").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` is null or was returned by this library and not freed.
#[no_mangle]
pub unsafe extern "C" fn fomdp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// 2γφ/(1−γ).
///
/// # Safety
/// `out_bound` is writable.
#[no_mangle]
pub unsafe extern "C" fn fomdp_loss_bound(phi: f64, gamma: f64, out_bound: *mut f64) -> FomdpStatus {
    guard(|| {
        out(out_bound)?;
        *out_bound = fomdp_core::solvers::loss_bound(phi, gamma).map_err(|e| (FomdpStatus::OutOfRange, e.to_string()))?;
        Ok(())
    })
}
