//! Scheduling engine and trace-driven simulator for anytime (multi-exit)
//! inference under deadlines on a single accelerator.
//!
//! Jobs carry per-stage worst-case execution times and realized
//! exit-classifier outputs. The planner assigns each admitted job an
//! execution depth by quantized dynamic programming over predicted rewards,
//! re-plans incrementally as requests arrive, and hands freed budget to
//! sibling jobs when confidence comes in low. The simulator replays
//! workloads under this planner or under EDF / least-confidence /
//! round-robin baselines and reports accuracy, misses, depth, and scheduler
//! overhead.

pub mod error;
pub mod experiment;
pub mod oracle;
pub mod planner;
pub mod sim;
pub mod task;
pub mod utility;
pub mod validation;
pub mod workload;

pub use error::{Error, Result};
pub use experiment::{
    manifest_json, rows_to_csv, run_experiment, ExperimentPlan, SweepAxis, SweepRow, CSV_HEADER,
};
pub use oracle::{brute_force, OracleResult, DEFAULT_CAP};
pub use planner::{
    check_edf_feasible, choose_delta, greedy_reassign, quantize, DepthPlan, DpTable, DropMode,
    PlanOutcome, PlannerConfig, PlannerState, PlannerStats, QuantConfig, ReassignResult, TaskView,
};
pub use sim::{
    run_jobs, run_workload, CostMode, CostModel, JobOutcome, Policy, SimConfig, SimReport,
};
pub use task::{adjust_deadline, AdjustedJob, Job, JobId, StageProfile};
pub use utility::{RewardCurve, UtilityModel};
pub use validation::{
    random_instance, run_aligned_suite, run_bound_suite, run_incremental_suite, AlignedReport,
    BoundReport, IncrementalReport, ALIGNED_TOL, FPTAS_SLACK,
};
pub use workload::{
    profile_wcet, synth_library, ArrivalMode, SynthParams, TraceHeader, TraceLibrary, TraceRecord,
    WcetMethod, Workload, WorkloadSpec,
};
