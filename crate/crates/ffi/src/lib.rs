//! C ABI over the `ctnd` library.
//!
//! Objects cross the boundary as opaque pointers created by `*_new`,
//! `*_parse`, `*_generate_*` or `*_load` functions and released with the
//! matching `*_free`. Every fallible function returns a [`CtndStatus`]; on
//! failure [`ctnd_last_error_message`] describes the most recent error on the
//! calling thread.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ctnd::bnb::{solve, HeuristicEmphasis, IncumbentTrajectory, SolverConfig, SolverError};
use ctnd::diving::{dive_and_solve, DivingError};
use ctnd::eval::{primal_integral, EvalConfig, ReferenceKind};
use ctnd::gcnn::{load_model, save_model, GcnnModel};
use ctnd::graph::encode;
use ctnd::instance::{
    generate_covering, generate_knapsack, parse_instance, serialize_instance, MilpInstance,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtndStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    Infeasible = 5,
    SolverError = 6,
    ModelError = 7,
    IoError = 8,
    Panic = 9,
}

/// Values accepted by the `emphasis` argument of the solve functions. The
/// argument itself is a plain `int32_t` so that out-of-range values can be
/// rejected instead of being undefined behaviour.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtndEmphasis {
    Off = 0,
    Aggressive = 1,
}

pub struct CtndInstance(MilpInstance);
pub struct CtndModel(GcnnModel);
pub struct CtndTrajectory(IncumbentTrajectory);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

struct Failure(CtndStatus, String);

type FfiResult<T> = Result<T, Failure>;

fn fail<T>(status: CtndStatus, message: impl Into<String>) -> FfiResult<T> {
    Err(Failure(status, message.into()))
}

/// Runs `body`, recording any error or panic for the calling thread.
fn guard(body: impl FnOnce() -> FfiResult<()>) -> CtndStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            CtndStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(message);
            CtndStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    match p.as_ref() {
        Some(r) => Ok(r),
        None => fail(CtndStatus::NullPointer, format!("{what} is null")),
    }
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return fail(CtndStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(CtndStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return fail(CtndStatus::NullPointer, "output pointer is null");
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn solver_config(step_limit: u64, emphasis: i32) -> FfiResult<SolverConfig> {
    if step_limit == 0 {
        return fail(CtndStatus::InvalidArgument, "step_limit must be at least 1");
    }
    let heuristic_emphasis = match emphasis {
        e if e == CtndEmphasis::Off as i32 => HeuristicEmphasis::Off,
        e if e == CtndEmphasis::Aggressive as i32 => HeuristicEmphasis::Aggressive,
        other => return fail(CtndStatus::InvalidArgument, format!("unknown emphasis {other}")),
    };
    Ok(SolverConfig {
        heuristic_emphasis,
        ..SolverConfig::with_step_limit(step_limit)
    })
}

fn solver_failure(e: SolverError) -> Failure {
    match e {
        SolverError::InfeasibleSubproblem => Failure(CtndStatus::Infeasible, e.to_string()),
        SolverError::InvalidFixing { .. } | SolverError::InvalidConfig(_) => {
            Failure(CtndStatus::InvalidArgument, e.to_string())
        }
        SolverError::Lp(_) => Failure(CtndStatus::SolverError, e.to_string()),
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the same
/// thread.
#[no_mangle]
pub extern "C" fn ctnd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ctnd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses the text instance format.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctnd_instance_parse(
    text: *const c_char,
    out: *mut *mut CtndInstance,
) -> CtndStatus {
    guard(|| {
        let text = as_str(text, "text")?;
        let inst = parse_instance(text).map_err(|e| Failure(CtndStatus::ParseError, e.to_string()))?;
        write_out(out, CtndInstance(inst))
    })
}

/// Seeded set-covering instance with `n_rows <= n_vars`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctnd_instance_generate_covering(
    seed: u64,
    n_vars: usize,
    n_rows: usize,
    out: *mut *mut CtndInstance,
) -> CtndStatus {
    guard(|| {
        if n_vars == 0 || n_rows == 0 || n_rows > n_vars {
            return fail(
                CtndStatus::InvalidArgument,
                "covering needs 0 < n_rows <= n_vars",
            );
        }
        write_out(out, CtndInstance(generate_covering(seed, n_vars, n_rows)))
    })
}

/// Seeded multi-dimensional knapsack instance.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctnd_instance_generate_knapsack(
    seed: u64,
    n_items: usize,
    n_dims: usize,
    out: *mut *mut CtndInstance,
) -> CtndStatus {
    guard(|| {
        if n_items == 0 || n_dims == 0 {
            return fail(CtndStatus::InvalidArgument, "knapsack needs items and dimensions");
        }
        write_out(out, CtndInstance(generate_knapsack(seed, n_items, n_dims)))
    })
}

/// Serializes to the text format. Free the result with `ctnd_string_free`.
///
/// # Safety
/// `instance` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctnd_instance_serialize(
    instance: *const CtndInstance,
    out: *mut *mut c_char,
) -> CtndStatus {
    guard(|| {
        let inst = as_ref(instance, "instance")?;
        if out.is_null() {
            return fail(CtndStatus::NullPointer, "output pointer is null");
        }
        let text = CString::new(serialize_instance(&inst.0))
            .or_else(|_| fail(CtndStatus::InvalidArgument, "instance text contains NUL"))?;
        *out = text.into_raw();
        Ok(())
    })
}

/// Number of variables, or 0 for null.
///
/// # Safety
/// `instance` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn ctnd_instance_num_vars(instance: *const CtndInstance) -> usize {
    instance.as_ref().map_or(0, |i| i.0.num_vars())
}

/// Number of binary variables (the length of a prediction), or 0 for null.
///
/// # Safety
/// `instance` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn ctnd_instance_num_binary(instance: *const CtndInstance) -> usize {
    instance.as_ref().map_or(0, |i| i.0.binary_indices().len())
}

/// # Safety
/// `instance` must come from this library and not have been freed; null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn ctnd_instance_free(instance: *mut CtndInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Freshly initialised model with hidden width `hidden`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctnd_model_new(
    hidden: usize,
    seed: u64,
    out: *mut *mut CtndModel,
) -> CtndStatus {
    guard(|| {
        if hidden == 0 {
            return fail(CtndStatus::InvalidArgument, "hidden must be positive");
        }
        write_out(out, CtndModel(GcnnModel::new(hidden, seed)))
    })
}

/// Reads a model file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctnd_model_load(
    path: *const c_char,
    out: *mut *mut CtndModel,
) -> CtndStatus {
    guard(|| {
        let path = as_str(path, "path")?;
        let model = load_model(Path::new(path)).map_err(|e| {
            let status = match e {
                ctnd::gcnn::ModelFormatError::Io(_) => CtndStatus::IoError,
                _ => CtndStatus::ParseError,
            };
            Failure(status, format!("{path}: {e}"))
        })?;
        write_out(out, CtndModel(model))
    })
}

/// Writes a model file.
///
/// # Safety
/// `model` must be live; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ctnd_model_save(model: *const CtndModel, path: *const c_char) -> CtndStatus {
    guard(|| {
        let model = as_ref(model, "model")?;
        let path = as_str(path, "path")?;
        save_model(&model.0, Path::new(path))
            .map_err(|e| Failure(CtndStatus::IoError, format!("{path}: {e}")))
    })
}

/// Writes `P(x_j = 1)` for each binary variable of `instance`, in variable
/// order, into `probs[0..len]`. `len` must equal
/// `ctnd_instance_num_binary(instance)`.
///
/// # Safety
/// `model` and `instance` must be live; `probs` must have room for `len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn ctnd_model_predict(
    model: *const CtndModel,
    instance: *const CtndInstance,
    probs: *mut f64,
    len: usize,
) -> CtndStatus {
    guard(|| {
        let model = as_ref(model, "model")?;
        let inst = as_ref(instance, "instance")?;
        if probs.is_null() {
            return fail(CtndStatus::NullPointer, "probs is null");
        }
        let p = model
            .0
            .forward(&encode(&inst.0))
            .map_err(|e| Failure(CtndStatus::ModelError, e.to_string()))?;
        if p.len() != len {
            return fail(
                CtndStatus::InvalidArgument,
                format!("buffer holds {len} values, instance has {} binaries", p.len()),
            );
        }
        ptr::copy_nonoverlapping(p.as_ptr(), probs, len);
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not have been freed; null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn ctnd_model_free(model: *mut CtndModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Branch and bound with `n_fixings` binary fixings
/// `fix_vars[k] := fix_values[k] != 0`. Returns `CTND_STATUS_INFEASIBLE` when
/// the fixed problem has no feasible point.
///
/// # Safety
/// `instance` must be live; the fixing arrays must hold `n_fixings` entries
/// (they may be null when `n_fixings` is 0); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctnd_solve(
    instance: *const CtndInstance,
    fix_vars: *const usize,
    fix_values: *const u8,
    n_fixings: usize,
    step_limit: u64,
    emphasis: i32,
    out: *mut *mut CtndTrajectory,
) -> CtndStatus {
    guard(|| {
        let inst = as_ref(instance, "instance")?;
        let mut fixings = BTreeMap::new();
        if n_fixings > 0 {
            if fix_vars.is_null() || fix_values.is_null() {
                return fail(CtndStatus::NullPointer, "fixing arrays are null");
            }
            let vars = std::slice::from_raw_parts(fix_vars, n_fixings);
            let values = std::slice::from_raw_parts(fix_values, n_fixings);
            for (&j, &v) in vars.iter().zip(values) {
                fixings.insert(j, v != 0);
            }
        }
        let config = solver_config(step_limit, emphasis)?;
        let (traj, _) = solve(&inst.0, &fixings, &config).map_err(solver_failure)?;
        write_out(out, CtndTrajectory(traj))
    })
}

/// Predicts, fixes at threshold `t`, solves, and falls back to the unfixed
/// problem when the fixed one is infeasible. `fell_back` may be null.
///
/// # Safety
/// `instance` and `model` must be live; `out` must be writable; `fell_back`
/// must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn ctnd_dive_and_solve(
    instance: *const CtndInstance,
    model: *const CtndModel,
    t: f64,
    step_limit: u64,
    emphasis: i32,
    out: *mut *mut CtndTrajectory,
    fell_back: *mut bool,
) -> CtndStatus {
    guard(|| {
        let inst = as_ref(instance, "instance")?;
        let model = as_ref(model, "model")?;
        let config = solver_config(step_limit, emphasis)?;
        let result = dive_and_solve(&inst.0, &model.0, t, &config).map_err(|e| match e {
            DivingError::InvalidThreshold(_) | DivingError::InvalidProbability { .. } => {
                Failure(CtndStatus::InvalidArgument, e.to_string())
            }
            DivingError::Model(_) => Failure(CtndStatus::ModelError, e.to_string()),
            DivingError::Solver(s) => solver_failure(s),
            other => Failure(CtndStatus::SolverError, other.to_string()),
        })?;
        if !fell_back.is_null() {
            *fell_back = result.outcome.fell_back;
        }
        write_out(out, CtndTrajectory(result.trajectory))
    })
}

/// Number of incumbent events, or 0 for null.
///
/// # Safety
/// `traj` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn ctnd_trajectory_len(traj: *const CtndTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.events.len())
}

/// Step and objective of event `k`.
///
/// # Safety
/// `traj` must be live; `step` and `objective` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctnd_trajectory_event(
    traj: *const CtndTrajectory,
    k: usize,
    step: *mut u64,
    objective: *mut f64,
) -> CtndStatus {
    guard(|| {
        let traj = as_ref(traj, "trajectory")?;
        let Some(e) = traj.0.events.get(k) else {
            return fail(
                CtndStatus::InvalidArgument,
                format!("event {k} of {}", traj.0.events.len()),
            );
        };
        if step.is_null() || objective.is_null() {
            return fail(CtndStatus::NullPointer, "output pointer is null");
        }
        *step = e.step;
        *objective = e.objective;
        Ok(())
    })
}

/// Whether the search closed the tree.
///
/// # Safety
/// `traj` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn ctnd_trajectory_proved_optimal(traj: *const CtndTrajectory) -> bool {
    traj.as_ref().is_some_and(|t| t.0.proved_optimal)
}

/// # Safety
/// `traj` must come from this library and not have been freed; null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn ctnd_trajectory_free(traj: *mut CtndTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Area between the primal bound and `reference` over `[0, step_limit]`,
/// charging `no_incumbent_value` before the first incumbent.
///
/// # Safety
/// `traj` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctnd_primal_integral(
    traj: *const CtndTrajectory,
    step_limit: u64,
    reference: f64,
    no_incumbent_value: f64,
    out: *mut f64,
) -> CtndStatus {
    guard(|| {
        let traj = as_ref(traj, "trajectory")?;
        if out.is_null() {
            return fail(CtndStatus::NullPointer, "output pointer is null");
        }
        let cfg = EvalConfig {
            step_limit,
            reference_objective: reference,
            reference_kind: ReferenceKind::BestKnown,
            no_incumbent_value,
        };
        *out = primal_integral(&traj.0, &cfg)
            .map_err(|e| Failure(CtndStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}
