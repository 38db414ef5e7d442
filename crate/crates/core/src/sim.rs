//! Discrete-event simulation of one edge server: a single non-preemptive
//! GPU executing stages, a deadline-ordered ready set, and a scheduler
//! invoked on request arrivals and stage completions.
//!
//! Time is event-driven. Ties at one instant process arrivals first, then
//! completions, then deadline expiries, each by job id; the dispatcher runs
//! once per instant after all its events. A stage, once dispatched, runs to
//! completion. Scheduler work can be charged to the timeline via a
//! deterministic cost model (or measured wall clock), delaying subsequent
//! dispatches.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::str::FromStr;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{DropMode, PlannerConfig, PlannerState, PlannerStats, QuantConfig};
use crate::task::{Job, JobId};
use crate::utility::UtilityModel;
use crate::workload::Workload;

/// Dispatch policy under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Policy {
    /// Depth planning with the given utility model.
    Planner(UtilityModel),
    /// Earliest adjusted deadline first, always to full depth.
    Edf,
    /// Least observed confidence first (unstarted jobs rank lowest).
    Lcf,
    /// Stage-level round robin in arrival order.
    Rr,
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Policy::Planner(m) => write!(f, "planner-{m}"),
            Policy::Edf => f.write_str("edf"),
            Policy::Lcf => f.write_str("lcf"),
            Policy::Rr => f.write_str("rr"),
        }
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edf" => Ok(Policy::Edf),
            "lcf" => Ok(Policy::Lcf),
            "rr" => Ok(Policy::Rr),
            _ => match s.strip_prefix("planner-") {
                Some(m) => Ok(Policy::Planner(m.parse()?)),
                None => Err(Error::Validation(format!("unknown policy '{s}'"))),
            },
        }
    }
}

/// How scheduler computation is charged to the simulated timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostMode {
    /// Scheduling is free.
    Off,
    /// Deterministic model: w = c0 + c1 · work units (table cells or
    /// candidate scans). Default; keeps runs reproducible.
    Model,
    /// Wall-clock time of the actual scheduler call (not reproducible).
    Measured,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub mode: CostMode,
    pub c0: f64,
    pub c1: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { mode: CostMode::Model, c0: 2e-5, c1: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub policy: Policy,
    pub quant: QuantConfig,
    pub drop_mode: DropMode,
    /// Depth-1 reward assumed before anything runs; None → 1/num_classes.
    pub prior: Option<f64>,
    /// CPU-processing constant subtracted in the deadline adjustment.
    pub cpu_overhead: f64,
    pub cost: CostModel,
    /// Uniform execution-time jitter: stage runs wcet·(1 − U[0, jitter]).
    pub jitter: Option<f64>,
    pub jitter_seed: u64,
    /// Greedy budget handoff on stage completions (planner policies).
    pub reassign: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            policy: Policy::Planner(UtilityModel::Exp),
            quant: QuantConfig::Delta(0.1),
            drop_mode: DropMode::Allow,
            prior: None,
            cpu_overhead: 0.001,
            cost: CostModel::default(),
            jitter: None,
            jitter_seed: 1,
            reassign: true,
        }
    }
}

/// Final accounting for one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobOutcome {
    pub id: JobId,
    /// Stages whose execution completed at or before the raw deadline.
    pub depth_executed: usize,
    /// Returned a usable (≥1 stage) result no later than the raw deadline.
    pub finished_by_deadline: bool,
    /// Correctness of the deepest stage finished before the raw deadline;
    /// false for misses.
    pub final_correct: bool,
    /// No stage finished before the deadline.
    pub missed: bool,
    pub returned_at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub jobs: u64,
    /// Correct results / all jobs (misses count as incorrect). 1.0 when no
    /// jobs ran.
    pub accuracy: f64,
    /// Correct results / jobs that produced any result.
    pub accuracy_served: f64,
    pub miss_rate: f64,
    pub mean_depth: f64,
    /// Scheduler time / simulated makespan.
    pub scheduler_overhead_fraction: f64,
    /// Planned stages that finished after their job's adjusted deadline.
    pub feasibility_violations: u64,
    pub makespan: f64,
    pub gpu_busy: f64,
    pub outcomes: Vec<JobOutcome>,
    pub planner: Option<PlannerStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Arrival = 0,
    StageComplete = 1,
    Expiry = 2,
}

struct Event {
    time: f64,
    kind: EventKind,
    id: JobId,
    /// Payload for arrivals.
    job: Option<Job>,
}

impl Event {
    fn key(&self) -> (f64, u8, u64) {
        (self.time, self.kind as u8, self.id.0)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // Reversed: BinaryHeap is a max-heap, we want the earliest event on top.
    fn cmp(&self, other: &Self) -> Ordering {
        let (ta, ka, ia) = self.key();
        let (tb, kb, ib) = other.key();
        tb.total_cmp(&ta)
            .then_with(|| kb.cmp(&ka))
            .then_with(|| ib.cmp(&ia))
    }
}

struct JobRun {
    job: Job,
    d_adj: f64,
    d_raw: f64,
    completed: usize,
    completions: Vec<f64>,
    last_conf: Option<f64>,
    running: bool,
    retired: bool,
}

struct Simulator<'w> {
    cfg: SimConfig,
    workload: Option<&'w mut Workload>,
    heap: BinaryHeap<Event>,
    runs: Vec<JobRun>,
    slot: std::collections::HashMap<JobId, usize>,
    active: Vec<JobId>,
    planner: Option<PlannerState>,
    gpu_busy_until: f64,
    running_job: Option<JobId>,
    dispatcher_free: f64,
    rr_last: Option<JobId>,
    jitter_rng: ChaCha8Rng,
    total_overhead: f64,
    gpu_busy: f64,
    makespan: f64,
    violations: u64,
    outcomes: Vec<JobOutcome>,
}

/// Run a workload-driven simulation (closed-loop clients keep issuing until
/// the workload's request budget is spent).
pub fn run_workload(workload: &mut Workload, cfg: &SimConfig) -> Result<SimReport> {
    let prior = cfg
        .prior
        .unwrap_or_else(|| UtilityModel::uniform_prior(workload.num_classes()));
    let initial = workload.initial();
    let mut sim = Simulator::new(cfg.clone(), prior, Some(workload));
    for job in initial {
        sim.push_arrival(job);
    }
    sim.event_loop()?;
    Ok(sim.report())
}

/// Run a fixed, pre-built job list (no closed-loop feedback). Arrival times
/// come from the jobs themselves.
pub fn run_jobs(jobs: Vec<Job>, cfg: &SimConfig) -> Result<SimReport> {
    let prior = cfg.prior.unwrap_or(0.1);
    let mut sim = Simulator::new(cfg.clone(), prior, None);
    for job in jobs {
        sim.push_arrival(job);
    }
    sim.event_loop()?;
    Ok(sim.report())
}

impl<'w> Simulator<'w> {
    fn new(cfg: SimConfig, prior: f64, workload: Option<&'w mut Workload>) -> Self {
        let planner = match cfg.policy {
            Policy::Planner(model) => Some(PlannerState::new(PlannerConfig {
                quant: cfg.quant,
                drop_mode: cfg.drop_mode,
                model,
                prior,
                reassign: cfg.reassign,
            })),
            _ => None,
        };
        Self {
            jitter_rng: ChaCha8Rng::seed_from_u64(cfg.jitter_seed),
            cfg,
            workload,
            heap: BinaryHeap::new(),
            runs: Vec::new(),
            slot: std::collections::HashMap::new(),
            active: Vec::new(),
            planner,
            gpu_busy_until: 0.0,
            running_job: None,
            dispatcher_free: 0.0,
            rr_last: None,
            total_overhead: 0.0,
            gpu_busy: 0.0,
            makespan: 0.0,
            violations: 0,
            outcomes: Vec::new(),
        }
    }

    fn push_arrival(&mut self, job: Job) {
        self.heap.push(Event {
            time: job.arrival,
            kind: EventKind::Arrival,
            id: job.id,
            job: Some(job),
        });
    }

    fn event_loop(&mut self) -> Result<()> {
        while let Some(now) = self.heap.peek().map(|e| e.time) {
            debug_assert!(now >= self.makespan, "time must not run backwards");
            self.makespan = now;
            while self
                .heap
                .peek()
                .is_some_and(|e| e.time == now)
            {
                let ev = self.heap.pop().unwrap();
                match ev.kind {
                    EventKind::Arrival => self.handle_arrival(ev.job.unwrap(), now)?,
                    EventKind::StageComplete => self.handle_completion(ev.id, now)?,
                    EventKind::Expiry => self.handle_expiry(ev.id, now),
                }
            }
            self.dispatch(now);
        }
        Ok(())
    }

    /// Fold scheduler work into the timeline: the dispatcher cannot issue
    /// the next stage until the charge is paid.
    fn charge(&mut self, now: f64, units: u64, measured: Option<f64>) {
        let w = match self.cfg.cost.mode {
            CostMode::Off => 0.0,
            CostMode::Model => self.cfg.cost.c0 + self.cfg.cost.c1 * units as f64,
            CostMode::Measured => measured.unwrap_or(0.0),
        };
        self.dispatcher_free = self.dispatcher_free.max(now) + w;
        self.total_overhead += w;
    }

    fn handle_arrival(&mut self, job: Job, now: f64) -> Result<()> {
        let adj = job.adjust(self.cfg.cpu_overhead);
        let id = job.id;
        let idx = self.runs.len();
        self.runs.push(JobRun {
            d_adj: adj.d_adj,
            d_raw: job.raw_deadline(),
            job,
            completed: 0,
            completions: Vec::new(),
            last_conf: None,
            running: false,
            retired: false,
        });
        self.slot.insert(id, idx);
        self.active.push(id);
        self.heap.push(Event {
            time: adj.d_adj.max(now),
            kind: EventKind::Expiry,
            id,
            job: None,
        });
        if let Some(planner) = self.planner.as_mut() {
            let avail = now.max(self.gpu_busy_until);
            let t0 = (self.cfg.cost.mode == CostMode::Measured).then(Instant::now);
            let outcome = planner.on_arrival(&adj, avail)?;
            let measured = t0.map(|t| t.elapsed().as_secs_f64());
            self.charge(now, outcome.cells, measured);
            self.retire_satisfied(now);
        } else {
            self.charge(now, 0, Some(0.0));
        }
        Ok(())
    }

    fn handle_completion(&mut self, id: JobId, now: f64) -> Result<()> {
        let idx = self.slot[&id];
        let run = &mut self.runs[idx];
        debug_assert!(run.running && !run.retired);
        run.running = false;
        run.completed += 1;
        run.completions.push(now);
        run.last_conf = Some(run.job.stages[run.completed - 1].confidence);
        let (d_adj, completed, total) = (run.d_adj, run.completed, run.job.depth());
        self.running_job = None;
        let target = if self.planner.is_some() {
            if now > d_adj {
                self.violations += 1;
            }
            let t0 = (self.cfg.cost.mode == CostMode::Measured).then(Instant::now);
            let planner = self.planner.as_mut().unwrap();
            let outcome = planner.on_stage_complete(id, now)?;
            let target = planner.planned_depth(id).unwrap_or(completed);
            let measured = t0.map(|t| t.elapsed().as_secs_f64());
            self.charge(now, outcome.cells, measured);
            target
        } else {
            self.charge(now, 0, Some(0.0));
            total
        };
        if now >= d_adj || completed >= target {
            self.retire(id, now);
        }
        if self.planner.is_some() {
            self.retire_satisfied(now);
        }
        Ok(())
    }

    fn handle_expiry(&mut self, id: JobId, now: f64) {
        let run = &self.runs[self.slot[&id]];
        if !run.retired && !run.running {
            self.retire(id, now);
        }
    }

    /// Return every idle job whose plan is already satisfied (replanning can
    /// shrink a started job's target). Dropped-but-unstarted jobs stay until
    /// expiry: a later budget handoff may still revive them.
    fn retire_satisfied(&mut self, now: f64) {
        let planner = self.planner.as_ref().expect("planner policy");
        let due: Vec<JobId> = self
            .active
            .iter()
            .copied()
            .filter(|id| {
                let run = &self.runs[self.slot[id]];
                !run.running
                    && run.completed >= 1
                    && planner.planned_depth(*id).is_some_and(|l| l <= run.completed)
            })
            .collect();
        for id in due {
            self.retire(id, now);
        }
    }

    fn retire(&mut self, id: JobId, now: f64) {
        let idx = self.slot[&id];
        let run = &mut self.runs[idx];
        debug_assert!(!run.retired);
        run.retired = true;
        let depth_executed = run.completions.iter().filter(|&&t| t <= run.d_raw).count();
        let missed = depth_executed == 0;
        self.outcomes.push(JobOutcome {
            id,
            depth_executed,
            finished_by_deadline: !missed && now <= run.d_raw,
            final_correct: !missed && run.job.stages[depth_executed - 1].correct,
            missed,
            returned_at: now,
        });
        self.active.retain(|&j| j != id);
        if let Some(planner) = self.planner.as_mut() {
            planner.retire(id);
        }
        if let Some(w) = self.workload.as_mut() {
            if let Some(job) = w.on_return(now) {
                self.push_arrival(job);
            }
        }
    }

    fn dispatch(&mut self, now: f64) {
        if self.running_job.is_some() {
            return;
        }
        let Some(id) = self.pick_next() else { return };
        let start = now.max(self.dispatcher_free);
        let idx = self.slot[&id];
        let run = &mut self.runs[idx];
        let wcet = run.job.stages[run.completed].wcet;
        let dur = match self.cfg.jitter {
            Some(f) if f > 0.0 => wcet * (1.0 - self.jitter_rng.random_range(0.0..f)),
            _ => wcet,
        };
        run.running = true;
        self.running_job = Some(id);
        self.gpu_busy_until = start + dur;
        self.gpu_busy += dur;
        self.rr_last = Some(id);
        if let Some(planner) = self.planner.as_mut() {
            planner.on_dispatch(id);
        }
        self.heap.push(Event {
            time: start + dur,
            kind: EventKind::StageComplete,
            id,
            job: None,
        });
    }

    fn pick_next(&self) -> Option<JobId> {
        let candidates = self.active.iter().copied().filter(|id| {
            let run = &self.runs[self.slot[id]];
            if run.running || run.retired {
                return false;
            }
            match &self.planner {
                Some(p) => p
                    .planned_depth(*id)
                    .is_some_and(|l| l > run.completed),
                None => run.completed < run.job.depth(),
            }
        });
        match self.cfg.policy {
            Policy::Planner(_) | Policy::Edf => candidates.min_by(|a, b| {
                let ra = &self.runs[self.slot[a]];
                let rb = &self.runs[self.slot[b]];
                ra.d_adj.total_cmp(&rb.d_adj).then_with(|| a.cmp(b))
            }),
            Policy::Lcf => candidates.min_by(|a, b| {
                let ra = &self.runs[self.slot[a]];
                let rb = &self.runs[self.slot[b]];
                let ca = ra.last_conf.unwrap_or(-1.0);
                let cb = rb.last_conf.unwrap_or(-1.0);
                ca.total_cmp(&cb)
                    .then_with(|| ra.d_adj.total_cmp(&rb.d_adj))
                    .then_with(|| a.cmp(b))
            }),
            Policy::Rr => {
                // Cyclic successor of the last-served job in arrival order
                // (ids are issued in arrival order).
                let cands: Vec<JobId> = candidates.collect();
                let last = self.rr_last.map(|j| j.0);
                cands
                    .iter()
                    .copied()
                    .filter(|j| last.is_none_or(|l| j.0 > l))
                    .min()
                    .or_else(|| cands.into_iter().min())
            }
        }
    }

    fn report(&mut self) -> SimReport {
        let jobs = self.outcomes.len() as u64;
        let correct = self.outcomes.iter().filter(|o| o.final_correct).count() as f64;
        let served = self.outcomes.iter().filter(|o| !o.missed).count() as f64;
        let missed = self.outcomes.iter().filter(|o| o.missed).count() as f64;
        let depth_sum: usize = self.outcomes.iter().map(|o| o.depth_executed).sum();
        let mut outcomes = std::mem::take(&mut self.outcomes);
        outcomes.sort_by_key(|o| o.id);
        SimReport {
            jobs,
            accuracy: if jobs == 0 { 1.0 } else { correct / jobs as f64 },
            accuracy_served: if served == 0.0 { 1.0 } else { correct / served },
            miss_rate: if jobs == 0 { 0.0 } else { missed / jobs as f64 },
            mean_depth: if jobs == 0 { 0.0 } else { depth_sum as f64 / jobs as f64 },
            scheduler_overhead_fraction: if self.makespan > 0.0 {
                self.total_overhead / self.makespan
            } else {
                0.0
            },
            feasibility_violations: self.violations,
            makespan: self.makespan,
            gpu_busy: self.gpu_busy,
            outcomes,
            planner: self.planner.as_ref().map(|p| p.stats()),
        }
    }
}
