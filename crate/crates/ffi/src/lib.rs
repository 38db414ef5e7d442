//! C ABI over the anysched planner and trace-driven simulator.
//!
//! Conventions:
//! - Constructors return null on failure; fallible calls return [`AsStatus`]
//!   with `AS_STATUS_OK == 0`. After either kind of failure,
//!   [`as_last_error`] returns a message for the calling thread.
//! - Every handle type has exactly one `*_free`; passing null is a no-op.
//!   Handles are not thread-safe; don't share one across threads without
//!   external locking.
//! - No call unwinds across the boundary: panics are caught and surfaced as
//!   `AS_STATUS_PANIC` (or null).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use anysched::error::Error;
use anysched::planner::{DropMode, PlannerConfig, PlannerState, QuantConfig};
use anysched::sim::{run_workload, CostMode, CostModel, Policy, SimConfig, SimReport};
use anysched::task::{Job, JobId, StageProfile};
use anysched::utility::UtilityModel;
use anysched::workload::{
    synth_library, ArrivalMode, SynthParams, TraceLibrary, Workload, WorkloadSpec,
};

/// Result of a fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Infeasible = 4,
    TooLarge = 5,
    ParseError = 6,
    IoError = 7,
    Panic = 8,
}

/// Dispatch policy selector for [`AsSimParams`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsPolicy {
    Planner = 0,
    Edf = 1,
    Lcf = 2,
    Rr = 3,
}

/// Utility model used by the planner policy.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsModel {
    Exp = 0,
    Max = 1,
    Lin = 2,
    Oracle = 3,
}

/// How scheduler decision time is charged inside the simulation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsCostMode {
    Off = 0,
    Model = 1,
    Measured = 2,
}

/// Loaded or synthesized trace library (opaque).
pub struct AsTrace {
    lib: TraceLibrary,
}

/// Finished simulation report (opaque).
pub struct AsReport {
    report: SimReport,
}

/// Incremental depth planner (opaque). Drives the quantized DP directly,
/// without the surrounding event loop.
pub struct AsPlanner {
    state: PlannerState,
    cpu_overhead: f64,
}

/// Simulation setup, passed by pointer. Start from
/// [`as_sim_params_default`] and override fields.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AsSimParams {
    pub policy: AsPolicy,
    /// Utility model; only read when `policy` is `AS_POLICY_PLANNER`.
    pub model: AsModel,
    /// Closed-loop client count (think-time-free request sources).
    pub clients: u64,
    /// Relative deadline range, drawn uniformly per job.
    pub d_min: f64,
    pub d_max: f64,
    /// Total jobs to generate.
    pub count: u64,
    /// Mandatory depth for every job, 1-based.
    pub mandatory: u64,
    /// Poisson arrival rate; <= 0 selects the closed-loop model instead.
    pub poisson_rate: f64,
    pub seed: u64,
    /// Reward grid step; read when `epsilon <= 0`.
    pub delta: f64,
    /// Approximation target; > 0 derives the grid from (1 - epsilon).
    pub epsilon: f64,
    /// Refuse plans that would drop a job below its mandatory depth.
    pub strict_mandatory: bool,
    /// Depth-1 reward assumed before any stage runs; < 0 means 1/classes.
    pub prior: f64,
    /// Constant subtracted in the deadline adjustment.
    pub cpu_overhead: f64,
    pub cost_mode: AsCostMode,
    /// Cost model intercept (seconds per scheduler call).
    pub cost_c0: f64,
    /// Cost model slope (seconds per table cell / scan step).
    pub cost_c1: f64,
    /// Uniform execution-time jitter fraction; <= 0 disables.
    pub jitter: f64,
    pub jitter_seed: u64,
    /// Greedy budget handoff on stage completions (planner policy only).
    pub reassign: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl AsRef<str>) {
    // Interior NULs would truncate the CString; strip them.
    let clean: String = msg.as_ref().chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).unwrap_or_default());
}

fn status_of(e: &Error) -> AsStatus {
    match e {
        Error::Validation(_)
        | Error::DepthOutOfRange { .. }
        | Error::MissingOracle
        | Error::Config(_) => AsStatus::InvalidArgument,
        Error::InfeasibleMandatory => AsStatus::Infeasible,
        Error::InstanceTooLarge { .. } => AsStatus::TooLarge,
        Error::TraceParse { .. } => AsStatus::ParseError,
        _ => AsStatus::IoError,
    }
}

fn fail(e: Error) -> AsStatus {
    let code = status_of(&e);
    set_error(e.to_string());
    code
}

/// Runs `body`, converting any panic into `fallback` plus a stored message.
fn guard<T>(fallback: T, body: impl FnOnce() -> T) -> T {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(v) => v,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic across ffi boundary: {msg}"));
            fallback
        }
    }
}

/// # Safety
/// `p` must be null or point to a NUL-terminated string.
unsafe fn cstr_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, AsStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(AsStatus::NullArgument);
    }
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| {
        set_error(format!("{what} is not valid utf-8"));
        AsStatus::InvalidUtf8
    })
}

fn model_of(m: AsModel) -> UtilityModel {
    match m {
        AsModel::Exp => UtilityModel::Exp,
        AsModel::Max => UtilityModel::Max,
        AsModel::Lin => UtilityModel::Lin,
        AsModel::Oracle => UtilityModel::Oracle,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn as_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the calling thread's most recent failure. The pointer
/// stays valid until the next failing call on the same thread. Empty string
/// when nothing has failed yet.
#[no_mangle]
pub extern "C" fn as_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a trace library from `path`. Null on failure.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn as_trace_load(path: *const c_char) -> *mut AsTrace {
    guard(ptr::null_mut(), || {
        let path = match unsafe { cstr_arg(path, "path") } {
            Ok(s) => s,
            Err(_) => return ptr::null_mut(),
        };
        match TraceLibrary::load(Path::new(path)) {
            Ok(lib) => Box::into_raw(Box::new(AsTrace { lib })),
            Err(e) => {
                fail(e);
                ptr::null_mut()
            }
        }
    })
}

/// Generates a synthetic trace library. `wcet` must point to `stages`
/// doubles. `easy_frac` / `stuck_frac` < 0 pick the built-in defaults.
/// Null on failure.
///
/// # Safety
/// `wcet` must point to at least `stages` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn as_trace_synth(
    stages: u32,
    classes: u32,
    records: u64,
    wcet: *const f64,
    easy_frac: f64,
    stuck_frac: f64,
    seed: u64,
) -> *mut AsTrace {
    guard(ptr::null_mut(), || {
        if wcet.is_null() {
            set_error("wcet is null");
            return ptr::null_mut();
        }
        if stages == 0 {
            set_error("stages must be >= 1");
            return ptr::null_mut();
        }
        let wcet = unsafe { slice::from_raw_parts(wcet, stages as usize) };
        let mut params = SynthParams::default();
        if easy_frac >= 0.0 {
            params.easy_frac = easy_frac;
        }
        if stuck_frac >= 0.0 {
            params.stuck_frac = stuck_frac;
        }
        let built = synth_library(
            stages as usize,
            classes as usize,
            records as usize,
            wcet,
            &params,
            seed,
        );
        match built {
            Ok(lib) => Box::into_raw(Box::new(AsTrace { lib })),
            Err(e) => {
                fail(e);
                ptr::null_mut()
            }
        }
    })
}

/// Writes the library back out in the text trace format.
///
/// # Safety
/// `trace` must be a live handle from this library; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn as_trace_save(trace: *const AsTrace, path: *const c_char) -> AsStatus {
    guard(AsStatus::Panic, || {
        let Some(t) = (unsafe { trace.as_ref() }) else {
            set_error("trace is null");
            return AsStatus::NullArgument;
        };
        let path = match unsafe { cstr_arg(path, "path") } {
            Ok(s) => s,
            Err(code) => return code,
        };
        match t.lib.save(Path::new(path)) {
            Ok(()) => AsStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn as_trace_stages(trace: *const AsTrace) -> u32 {
    guard(0, || {
        unsafe { trace.as_ref() }.map_or(0, |t| t.lib.header.num_stages as u32)
    })
}

#[no_mangle]
pub unsafe extern "C" fn as_trace_classes(trace: *const AsTrace) -> u32 {
    guard(0, || {
        unsafe { trace.as_ref() }.map_or(0, |t| t.lib.header.num_classes as u32)
    })
}

#[no_mangle]
pub unsafe extern "C" fn as_trace_records(trace: *const AsTrace) -> u64 {
    guard(0, || {
        unsafe { trace.as_ref() }.map_or(0, |t| t.lib.records.len() as u64)
    })
}

/// # Safety
/// `trace` must have come from this library and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn as_trace_free(trace: *mut AsTrace) {
    guard((), || {
        if !trace.is_null() {
            drop(unsafe { Box::from_raw(trace) });
        }
    })
}

/// Defaults mirroring the CLI: planner-exp, 20 clients, deadlines in
/// [0.01, 0.35], 300 jobs, grid step 0.1, deterministic cost model.
#[no_mangle]
pub extern "C" fn as_sim_params_default() -> AsSimParams {
    AsSimParams {
        policy: AsPolicy::Planner,
        model: AsModel::Exp,
        clients: 20,
        d_min: 0.01,
        d_max: 0.35,
        count: 300,
        mandatory: 1,
        poisson_rate: 0.0,
        seed: 1,
        delta: 0.1,
        epsilon: 0.0,
        strict_mandatory: false,
        prior: -1.0,
        cpu_overhead: 0.001,
        cost_mode: AsCostMode::Model,
        cost_c0: 2e-5,
        cost_c1: 1e-7,
        jitter: 0.0,
        jitter_seed: 0,
        reassign: true,
    }
}

fn build_and_run(lib: &TraceLibrary, p: &AsSimParams) -> anysched::error::Result<SimReport> {
    let arrivals = if p.poisson_rate > 0.0 {
        ArrivalMode::Poisson { rate: p.poisson_rate }
    } else {
        ArrivalMode::ClosedLoop
    };
    let spec = WorkloadSpec {
        clients: p.clients as usize,
        d_min: p.d_min,
        d_max: p.d_max,
        count: p.count,
        mandatory: p.mandatory as usize,
        arrivals,
        seed: p.seed,
    };
    let mut workload = Workload::new(spec, lib.clone())?;
    let cfg = SimConfig {
        policy: match p.policy {
            AsPolicy::Planner => Policy::Planner(model_of(p.model)),
            AsPolicy::Edf => Policy::Edf,
            AsPolicy::Lcf => Policy::Lcf,
            AsPolicy::Rr => Policy::Rr,
        },
        quant: if p.epsilon > 0.0 {
            QuantConfig::Epsilon(p.epsilon)
        } else {
            QuantConfig::Delta(p.delta)
        },
        drop_mode: if p.strict_mandatory { DropMode::Mandatory } else { DropMode::Allow },
        prior: (p.prior >= 0.0).then_some(p.prior),
        cpu_overhead: p.cpu_overhead,
        cost: CostModel {
            mode: match p.cost_mode {
                AsCostMode::Off => CostMode::Off,
                AsCostMode::Model => CostMode::Model,
                AsCostMode::Measured => CostMode::Measured,
            },
            c0: p.cost_c0,
            c1: p.cost_c1,
        },
        jitter: (p.jitter > 0.0).then_some(p.jitter),
        jitter_seed: p.jitter_seed,
        reassign: p.reassign,
    };
    run_workload(&mut workload, &cfg)
}

/// Runs one simulation over `trace`. Null on failure.
///
/// # Safety
/// Both pointers must be live; `params` is read, not retained.
#[no_mangle]
pub unsafe extern "C" fn as_simulate(
    trace: *const AsTrace,
    params: *const AsSimParams,
) -> *mut AsReport {
    guard(ptr::null_mut(), || {
        let Some(t) = (unsafe { trace.as_ref() }) else {
            set_error("trace is null");
            return ptr::null_mut();
        };
        let Some(p) = (unsafe { params.as_ref() }) else {
            set_error("params is null");
            return ptr::null_mut();
        };
        match build_and_run(&t.lib, p) {
            Ok(report) => Box::into_raw(Box::new(AsReport { report })),
            Err(e) => {
                fail(e);
                ptr::null_mut()
            }
        }
    })
}

// Report getters return 0 when `report` is null so bindings can chain them
// without branching; check the pointer from `as_simulate` instead.

/// Jobs that arrived.
///
/// # Safety
/// `report` must be null or a live handle from `as_simulate`.
#[no_mangle]
pub unsafe extern "C" fn as_report_jobs(report: *const AsReport) -> u64 {
    guard(0, || unsafe { report.as_ref() }.map_or(0, |r| r.report.jobs))
}

/// Correct results over all jobs; misses count as incorrect.
///
/// # Safety
/// `report` must be null or a live handle from `as_simulate`.
#[no_mangle]
pub unsafe extern "C" fn as_report_accuracy(report: *const AsReport) -> f64 {
    guard(0.0, || unsafe { report.as_ref() }.map_or(0.0, |r| r.report.accuracy))
}

/// Correct results over jobs that returned anything.
///
/// # Safety
/// `report` must be null or a live handle from `as_simulate`.
#[no_mangle]
pub unsafe extern "C" fn as_report_accuracy_served(report: *const AsReport) -> f64 {
    guard(0.0, || unsafe { report.as_ref() }.map_or(0.0, |r| r.report.accuracy_served))
}

/// # Safety
/// `report` must be null or a live handle from `as_simulate`.
#[no_mangle]
pub unsafe extern "C" fn as_report_miss_rate(report: *const AsReport) -> f64 {
    guard(0.0, || unsafe { report.as_ref() }.map_or(0.0, |r| r.report.miss_rate))
}

/// # Safety
/// `report` must be null or a live handle from `as_simulate`.
#[no_mangle]
pub unsafe extern "C" fn as_report_mean_depth(report: *const AsReport) -> f64 {
    guard(0.0, || unsafe { report.as_ref() }.map_or(0.0, |r| r.report.mean_depth))
}

/// Scheduler decision time over simulated makespan.
///
/// # Safety
/// `report` must be null or a live handle from `as_simulate`.
#[no_mangle]
pub unsafe extern "C" fn as_report_overhead_fraction(report: *const AsReport) -> f64 {
    guard(0.0, || {
        unsafe { report.as_ref() }.map_or(0.0, |r| r.report.scheduler_overhead_fraction)
    })
}

/// Planned stages that finished past their job's adjusted deadline.
///
/// # Safety
/// `report` must be null or a live handle from `as_simulate`.
#[no_mangle]
pub unsafe extern "C" fn as_report_violations(report: *const AsReport) -> u64 {
    guard(0, || {
        unsafe { report.as_ref() }.map_or(0, |r| r.report.feasibility_violations)
    })
}

/// # Safety
/// `report` must be null or a live handle from `as_simulate`.
#[no_mangle]
pub unsafe extern "C" fn as_report_makespan(report: *const AsReport) -> f64 {
    guard(0.0, || unsafe { report.as_ref() }.map_or(0.0, |r| r.report.makespan))
}

/// # Safety
/// `report` must have come from `as_simulate` and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn as_report_free(report: *mut AsReport) {
    guard((), || {
        if !report.is_null() {
            drop(unsafe { Box::from_raw(report) });
        }
    })
}

/// Creates a standalone planner. `epsilon > 0` derives the reward grid from
/// (1 - epsilon); otherwise `delta` is the fixed grid step. `prior < 0`
/// picks the default. Null on failure.
#[no_mangle]
pub extern "C" fn as_planner_new(
    delta: f64,
    epsilon: f64,
    strict_mandatory: bool,
    model: AsModel,
    prior: f64,
    reassign: bool,
    cpu_overhead: f64,
) -> *mut AsPlanner {
    guard(ptr::null_mut(), || {
        if epsilon <= 0.0 && !(delta > 0.0) {
            set_error(format!("grid step must be > 0, got {delta}"));
            return ptr::null_mut();
        }
        if !(cpu_overhead >= 0.0) {
            set_error(format!("cpu_overhead must be >= 0, got {cpu_overhead}"));
            return ptr::null_mut();
        }
        let defaults = PlannerConfig::default();
        let cfg = PlannerConfig {
            quant: if epsilon > 0.0 {
                QuantConfig::Epsilon(epsilon)
            } else {
                QuantConfig::Delta(delta)
            },
            drop_mode: if strict_mandatory { DropMode::Mandatory } else { DropMode::Allow },
            model: model_of(model),
            prior: if prior >= 0.0 { prior } else { defaults.prior },
            reassign,
        };
        Box::into_raw(Box::new(AsPlanner { state: PlannerState::new(cfg), cpu_overhead }))
    })
}

fn planner_has(p: &AsPlanner, id: u64) -> bool {
    p.state.tasks().iter().any(|t| t.id == JobId(id))
}

/// Admits a job and replans. `wcet` and `confidence` must each point to
/// `depth` doubles: per-stage worst-case times and realized exit
/// confidences. `avail` is when the executor next frees up.
///
/// # Safety
/// `planner` must be live; both arrays must hold `depth` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn as_planner_arrive(
    planner: *mut AsPlanner,
    id: u64,
    arrival: f64,
    rel_deadline: f64,
    wcet: *const f64,
    confidence: *const f64,
    depth: usize,
    mandatory: usize,
    avail: f64,
) -> AsStatus {
    guard(AsStatus::Panic, || {
        let Some(p) = (unsafe { planner.as_mut() }) else {
            set_error("planner is null");
            return AsStatus::NullArgument;
        };
        if wcet.is_null() || confidence.is_null() {
            set_error("wcet / confidence arrays must not be null");
            return AsStatus::NullArgument;
        }
        if depth == 0 {
            set_error("depth must be >= 1");
            return AsStatus::InvalidArgument;
        }
        if planner_has(p, id) {
            set_error(format!("job id {id} already admitted"));
            return AsStatus::InvalidArgument;
        }
        let wcets = unsafe { slice::from_raw_parts(wcet, depth) };
        let confs = unsafe { slice::from_raw_parts(confidence, depth) };
        let stages: anysched::error::Result<Vec<StageProfile>> = wcets
            .iter()
            .zip(confs)
            .map(|(&w, &c)| StageProfile::new(w, c, true))
            .collect();
        let stages = match stages {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        let job = match Job::new(JobId(id), arrival, rel_deadline, stages, mandatory) {
            Ok(j) => j,
            Err(e) => return fail(e),
        };
        let adj = job.adjust(p.cpu_overhead);
        match p.state.on_arrival(&adj, avail) {
            Ok(_) => AsStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Planned depth for `id`: 0 means dropped, -1 means unknown job or error.
///
/// # Safety
/// `planner` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn as_planner_depth(planner: *const AsPlanner, id: u64) -> i64 {
    guard(-1, || {
        let Some(p) = (unsafe { planner.as_ref() }) else {
            set_error("planner is null");
            return -1;
        };
        match p.state.planned_depth(JobId(id)) {
            Some(depth) => depth as i64,
            None => {
                set_error(format!("job id {id} is not in the plan"));
                -1
            }
        }
    })
}

/// Jobs currently tracked by the planner.
///
/// # Safety
/// `planner` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn as_planner_len(planner: *const AsPlanner) -> u64 {
    guard(0, || {
        unsafe { planner.as_ref() }.map_or(0, |p| p.state.tasks().len() as u64)
    })
}

/// Predicted total reward of the current plan.
///
/// # Safety
/// `planner` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn as_planner_predicted_reward(planner: *const AsPlanner) -> f64 {
    guard(0.0, || {
        unsafe { planner.as_ref() }.map_or(0.0, |p| p.state.plan().predicted_reward)
    })
}

/// Marks `id`'s next stage as started (it becomes committed work).
///
/// # Safety
/// `planner` must be live.
#[no_mangle]
pub unsafe extern "C" fn as_planner_dispatch(planner: *mut AsPlanner, id: u64) -> AsStatus {
    guard(AsStatus::Panic, || {
        let Some(p) = (unsafe { planner.as_mut() }) else {
            set_error("planner is null");
            return AsStatus::NullArgument;
        };
        if !planner_has(p, id) {
            set_error(format!("unknown job id {id}"));
            return AsStatus::InvalidArgument;
        }
        p.state.on_dispatch(JobId(id));
        AsStatus::Ok
    })
}

/// Records that `id`'s dispatched stage finished and replans with the
/// realized confidence folded in.
///
/// # Safety
/// `planner` must be live.
#[no_mangle]
pub unsafe extern "C" fn as_planner_stage_done(
    planner: *mut AsPlanner,
    id: u64,
    avail: f64,
) -> AsStatus {
    guard(AsStatus::Panic, || {
        let Some(p) = (unsafe { planner.as_mut() }) else {
            set_error("planner is null");
            return AsStatus::NullArgument;
        };
        if !planner_has(p, id) {
            set_error(format!("unknown job id {id}"));
            return AsStatus::InvalidArgument;
        }
        match p.state.on_stage_complete(JobId(id), avail) {
            Ok(_) => AsStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Removes `id` from planning. Unknown ids are a no-op.
///
/// # Safety
/// `planner` must be live.
#[no_mangle]
pub unsafe extern "C" fn as_planner_retire(planner: *mut AsPlanner, id: u64) -> AsStatus {
    guard(AsStatus::Panic, || {
        let Some(p) = (unsafe { planner.as_mut() }) else {
            set_error("planner is null");
            return AsStatus::NullArgument;
        };
        p.state.retire(JobId(id));
        AsStatus::Ok
    })
}

/// # Safety
/// `planner` must have come from `as_planner_new` and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn as_planner_free(planner: *mut AsPlanner) {
    guard((), || {
        if !planner.is_null() {
            drop(unsafe { Box::from_raw(planner) });
        }
    })
}
