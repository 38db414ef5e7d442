#ifndef ANYSCHED_H
#define ANYSCHED_H

/* Generated by cbindgen from anysched-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * How scheduler decision time is charged inside the simulation.
 */
typedef enum AsCostMode {
  AS_COST_MODE_OFF = 0,
  AS_COST_MODE_MODEL = 1,
  AS_COST_MODE_MEASURED = 2,
} AsCostMode;

/**
 * Utility model used by the planner policy.
 */
typedef enum AsModel {
  AS_MODEL_EXP = 0,
  AS_MODEL_MAX = 1,
  AS_MODEL_LIN = 2,
  AS_MODEL_ORACLE = 3,
} AsModel;

/**
 * Dispatch policy selector for [`AsSimParams`].
 */
typedef enum AsPolicy {
  AS_POLICY_PLANNER = 0,
  AS_POLICY_EDF = 1,
  AS_POLICY_LCF = 2,
  AS_POLICY_RR = 3,
} AsPolicy;

/**
 * Result of a fallible call.
 */
typedef enum AsStatus {
  AS_STATUS_OK = 0,
  AS_STATUS_NULL_ARGUMENT = 1,
  AS_STATUS_INVALID_UTF8 = 2,
  AS_STATUS_INVALID_ARGUMENT = 3,
  AS_STATUS_INFEASIBLE = 4,
  AS_STATUS_TOO_LARGE = 5,
  AS_STATUS_PARSE_ERROR = 6,
  AS_STATUS_IO_ERROR = 7,
  AS_STATUS_PANIC = 8,
} AsStatus;

/**
 * Incremental depth planner (opaque). Drives the quantized DP directly,
 * without the surrounding event loop.
 */
typedef struct AsPlanner AsPlanner;

/**
 * Finished simulation report (opaque).
 */
typedef struct AsReport AsReport;

/**
 * Loaded or synthesized trace library (opaque).
 */
typedef struct AsTrace AsTrace;

/**
 * Simulation setup, passed by pointer. Start from
 * [`as_sim_params_default`] and override fields.
 */
typedef struct AsSimParams {
  enum AsPolicy policy;
  /**
   * Utility model; only read when `policy` is `AS_POLICY_PLANNER`.
   */
  enum AsModel model;
  /**
   * Closed-loop client count (think-time-free request sources).
   */
  uint64_t clients;
  /**
   * Relative deadline range, drawn uniformly per job.
   */
  double d_min;
  double d_max;
  /**
   * Total jobs to generate.
   */
  uint64_t count;
  /**
   * Mandatory depth for every job, 1-based.
   */
  uint64_t mandatory;
  /**
   * Poisson arrival rate; <= 0 selects the closed-loop model instead.
   */
  double poisson_rate;
  uint64_t seed;
  /**
   * Reward grid step; read when `epsilon <= 0`.
   */
  double delta;
  /**
   * Approximation target; > 0 derives the grid from (1 - epsilon).
   */
  double epsilon;
  /**
   * Refuse plans that would drop a job below its mandatory depth.
   */
  bool strict_mandatory;
  /**
   * Depth-1 reward assumed before any stage runs; < 0 means 1/classes.
   */
  double prior;
  /**
   * Constant subtracted in the deadline adjustment.
   */
  double cpu_overhead;
  enum AsCostMode cost_mode;
  /**
   * Cost model intercept (seconds per scheduler call).
   */
  double cost_c0;
  /**
   * Cost model slope (seconds per table cell / scan step).
   */
  double cost_c1;
  /**
   * Uniform execution-time jitter fraction; <= 0 disables.
   */
  double jitter;
  uint64_t jitter_seed;
  /**
   * Greedy budget handoff on stage completions (planner policy only).
   */
  bool reassign;
} AsSimParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *as_version(void);

/**
 * Message describing the calling thread's most recent failure. The pointer
 * stays valid until the next failing call on the same thread. Empty string
 * when nothing has failed yet.
 */
const char *as_last_error(void);

/**
 * Loads a trace library from `path`. Null on failure.
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
struct AsTrace *as_trace_load(const char *path);

/**
 * Generates a synthetic trace library. `wcet` must point to `stages`
 * doubles. `easy_frac` / `stuck_frac` < 0 pick the built-in defaults.
 * Null on failure.
 *
 * # Safety
 * `wcet` must point to at least `stages` readable doubles.
 */
struct AsTrace *as_trace_synth(uint32_t stages,
                               uint32_t classes,
                               uint64_t records,
                               const double *wcet,
                               double easy_frac,
                               double stuck_frac,
                               uint64_t seed);

/**
 * Writes the library back out in the text trace format.
 *
 * # Safety
 * `trace` must be a live handle from this library; `path` NUL-terminated.
 */
enum AsStatus as_trace_save(const struct AsTrace *trace, const char *path);

uint32_t as_trace_stages(const struct AsTrace *trace);

uint32_t as_trace_classes(const struct AsTrace *trace);

uint64_t as_trace_records(const struct AsTrace *trace);

/**
 * # Safety
 * `trace` must have come from this library and not been freed before.
 */
void as_trace_free(struct AsTrace *trace);

/**
 * Defaults mirroring the CLI: planner-exp, 20 clients, deadlines in
 * [0.01, 0.35], 300 jobs, grid step 0.1, deterministic cost model.
 */
struct AsSimParams as_sim_params_default(void);

/**
 * Runs one simulation over `trace`. Null on failure.
 *
 * # Safety
 * Both pointers must be live; `params` is read, not retained.
 */
struct AsReport *as_simulate(const struct AsTrace *trace, const struct AsSimParams *params);

/**
 * Jobs that arrived.
 *
 * # Safety
 * `report` must be null or a live handle from `as_simulate`.
 */
uint64_t as_report_jobs(const struct AsReport *report);

/**
 * Correct results over all jobs; misses count as incorrect.
 *
 * # Safety
 * `report` must be null or a live handle from `as_simulate`.
 */
double as_report_accuracy(const struct AsReport *report);

/**
 * Correct results over jobs that returned anything.
 *
 * # Safety
 * `report` must be null or a live handle from `as_simulate`.
 */
double as_report_accuracy_served(const struct AsReport *report);

/**
 * # Safety
 * `report` must be null or a live handle from `as_simulate`.
 */
double as_report_miss_rate(const struct AsReport *report);

/**
 * # Safety
 * `report` must be null or a live handle from `as_simulate`.
 */
double as_report_mean_depth(const struct AsReport *report);

/**
 * Scheduler decision time over simulated makespan.
 *
 * # Safety
 * `report` must be null or a live handle from `as_simulate`.
 */
double as_report_overhead_fraction(const struct AsReport *report);

/**
 * Planned stages that finished past their job's adjusted deadline.
 *
 * # Safety
 * `report` must be null or a live handle from `as_simulate`.
 */
uint64_t as_report_violations(const struct AsReport *report);

/**
 * # Safety
 * `report` must be null or a live handle from `as_simulate`.
 */
double as_report_makespan(const struct AsReport *report);

/**
 * # Safety
 * `report` must have come from `as_simulate` and not been freed before.
 */
void as_report_free(struct AsReport *report);

/**
 * Creates a standalone planner. `epsilon > 0` derives the reward grid from
 * (1 - epsilon); otherwise `delta` is the fixed grid step. `prior < 0`
 * picks the default. Null on failure.
 */
struct AsPlanner *as_planner_new(double delta,
                                 double epsilon,
                                 bool strict_mandatory,
                                 enum AsModel model,
                                 double prior,
                                 bool reassign,
                                 double cpu_overhead);

/**
 * Admits a job and replans. `wcet` and `confidence` must each point to
 * `depth` doubles: per-stage worst-case times and realized exit
 * confidences. `avail` is when the executor next frees up.
 *
 * # Safety
 * `planner` must be live; both arrays must hold `depth` readable doubles.
 */
enum AsStatus as_planner_arrive(struct AsPlanner *planner,
                                uint64_t id,
                                double arrival,
                                double rel_deadline,
                                const double *wcet,
                                const double *confidence,
                                size_t depth,
                                size_t mandatory,
                                double avail);

/**
 * Planned depth for `id`: 0 means dropped, -1 means unknown job or error.
 *
 * # Safety
 * `planner` must be null or live.
 */
int64_t as_planner_depth(const struct AsPlanner *planner, uint64_t id);

/**
 * Jobs currently tracked by the planner.
 *
 * # Safety
 * `planner` must be null or live.
 */
uint64_t as_planner_len(const struct AsPlanner *planner);

/**
 * Predicted total reward of the current plan.
 *
 * # Safety
 * `planner` must be null or live.
 */
double as_planner_predicted_reward(const struct AsPlanner *planner);

/**
 * Marks `id`'s next stage as started (it becomes committed work).
 *
 * # Safety
 * `planner` must be live.
 */
enum AsStatus as_planner_dispatch(struct AsPlanner *planner, uint64_t id);

/**
 * Records that `id`'s dispatched stage finished and replans with the
 * realized confidence folded in.
 *
 * # Safety
 * `planner` must be live.
 */
enum AsStatus as_planner_stage_done(struct AsPlanner *planner, uint64_t id, double avail);

/**
 * Removes `id` from planning. Unknown ids are a no-op.
 *
 * # Safety
 * `planner` must be live.
 */
enum AsStatus as_planner_retire(struct AsPlanner *planner, uint64_t id);

/**
 * # Safety
 * `planner` must have come from `as_planner_new` and not been freed before.
 */
void as_planner_free(struct AsPlanner *planner);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ANYSCHED_H */
