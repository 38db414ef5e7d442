//! Depth planner: assigns each active job an exit depth by dynamic
//! programming over quantized rewards, so that running the chosen stages in
//! deadline order meets every adjusted deadline.
//!
//! Rewards are quantized to multiples of Δ. The table cell `P(i, r)` holds
//! the minimum cumulative execution time over tasks `1..=i` (sorted by
//! adjusted deadline) whose quantized rewards sum to exactly `r`; `S(i, r)`
//! records the depth chosen for task `i` in that optimum. Choosing
//! Δ = ε·R/N, where R is the best reward any single task can feasibly reach,
//! makes the extracted plan a (1−ε)-approximation of the exact optimum.
//!
//! Between arrivals the table is not rebuilt: when a finished stage reports
//! a lower confidence than predicted, a greedy pass may hand that task's
//! remaining time budget to whichever other task gains the most from it.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::{AdjustedJob, Job, JobId};
use crate::utility::{RewardCurve, UtilityModel};

/// Nudge added before flooring so rewards that are exact multiples of Δ land
/// in their own quantum despite division round-off.
const QUANT_NUDGE: f64 = 1e-9;

/// ⌊reward / delta⌋ with boundary nudge.
pub fn quantize(reward: f64, delta: f64) -> u64 {
    debug_assert!(reward >= 0.0, "reward must be non-negative");
    debug_assert!(delta > 0.0, "delta must be positive");
    (reward / delta + QUANT_NUDGE).floor() as u64
}

/// Whether whole tasks may be dropped from the plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropMode {
    /// Unstarted tasks may be skipped entirely (depth 0).
    Allow,
    /// Every task must run at least its mandatory depth; if the mandatory
    /// parts alone don't fit, planning reports infeasibility.
    Mandatory,
}

impl std::fmt::Display for DropMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DropMode::Allow => "allow",
            DropMode::Mandatory => "mandatory",
        })
    }
}

impl FromStr for DropMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "allow" => Ok(DropMode::Allow),
            "mandatory" => Ok(DropMode::Mandatory),
            _ => Err(Error::Validation(format!("unknown drop mode '{s}'"))),
        }
    }
}

/// Reward quantum selection: fixed Δ, or ε from which Δ = ε·R/N is derived
/// at each planning instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QuantConfig {
    Delta(f64),
    Epsilon(f64),
}

impl QuantConfig {
    pub fn resolve(&self, tasks: &[TaskView], base: f64, mode: DropMode) -> f64 {
        match *self {
            QuantConfig::Delta(d) => d,
            QuantConfig::Epsilon(e) => choose_delta(e, tasks, base, mode),
        }
    }
}

/// Δ = ε·R/N where R is the largest reward any single task can reach on its
/// own by `base` (zero-cost options count as trivially reachable). Using the
/// reachable maximum — rather than the largest predicted value outright —
/// keeps the (1−ε) bound meaningful when the highest-reward depths cannot
/// meet their deadline anyway.
pub fn choose_delta(epsilon: f64, tasks: &[TaskView], base: f64, mode: DropMode) -> f64 {
    debug_assert!(epsilon > 0.0 && epsilon < 1.0);
    let mut r_max = 0.0_f64;
    for t in tasks {
        for (_, cost, reward) in t.depth_options(mode) {
            if cost == 0.0 || base + cost <= t.d_adj {
                r_max = r_max.max(reward);
            }
        }
    }
    if tasks.is_empty() || r_max <= 0.0 {
        return 1.0;
    }
    epsilon * r_max / tasks.len() as f64
}

/// Planner-side snapshot of one active job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskView {
    pub id: JobId,
    pub d_adj: f64,
    /// cum_exec[l] = wcet of the first l stages; cum_exec[0] = 0.
    pub cum_exec: Vec<f64>,
    pub mandatory: usize,
    /// Stages finished or currently running; the plan cannot go below this.
    pub committed: usize,
    /// Predicted (realized where observed) reward per depth.
    pub curve: RewardCurve,
}

impl TaskView {
    pub fn from_adjusted(adj: &AdjustedJob, curve: RewardCurve) -> Self {
        Self {
            id: adj.job.id,
            d_adj: adj.d_adj,
            cum_exec: adj.cum_exec.clone(),
            mandatory: adj.job.mandatory,
            committed: 0,
            curve,
        }
    }

    pub fn total_depth(&self) -> usize {
        self.cum_exec.len() - 1
    }

    /// Execution time still needed to reach `depth` (0 for committed work).
    pub fn remaining_cost(&self, depth: usize) -> f64 {
        debug_assert!(depth >= self.committed && depth <= self.total_depth());
        self.cum_exec[depth] - self.cum_exec[self.committed]
    }

    /// Reward collected when the task returns at `depth`; 0 when dropped.
    pub fn reward(&self, depth: usize) -> f64 {
        if depth == 0 {
            0.0
        } else {
            self.curve.at(depth)
        }
    }

    /// Smallest positive depth the plan may assign.
    pub fn positive_floor(&self, mode: DropMode) -> usize {
        if self.committed == 0 {
            self.mandatory
        } else if mode == DropMode::Mandatory {
            self.committed.max(self.mandatory)
        } else {
            self.committed
        }
    }

    fn can_skip(&self, mode: DropMode) -> bool {
        mode == DropMode::Allow && self.committed == 0
    }

    /// All depth choices as (depth, remaining cost, reward). Depth 0 appears
    /// only when the whole task may still be dropped.
    pub fn depth_options(&self, mode: DropMode) -> Vec<(usize, f64, f64)> {
        let mut opts = Vec::with_capacity(self.total_depth() + 1);
        if self.can_skip(mode) {
            opts.push((0, 0.0, 0.0));
        }
        for l in self.positive_floor(mode)..=self.total_depth() {
            opts.push((l, self.remaining_cost(l), self.reward(l)));
        }
        opts
    }
}

/// Rank-ordered depth assignment plus its value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthPlan {
    /// One entry per task, in adjusted-deadline order; depth 0 = dropped.
    pub assignments: Vec<(JobId, usize)>,
    pub quantized_reward: u64,
    pub predicted_reward: f64,
    pub planned_cost: f64,
}

impl DepthPlan {
    pub fn empty() -> Self {
        Self { assignments: Vec::new(), quantized_reward: 0, predicted_reward: 0.0, planned_cost: 0.0 }
    }

    pub fn depth_of(&self, id: JobId) -> Option<usize> {
        self.assignments.iter().find(|(j, _)| *j == id).map(|&(_, l)| l)
    }

    /// Recompute value fields from the views after depths changed.
    fn refresh_value(&mut self, tasks: &[TaskView], delta: f64) {
        debug_assert_eq!(self.assignments.len(), tasks.len());
        let mut reward = 0.0;
        let mut cost = 0.0;
        let mut quant = 0u64;
        for (t, &(id, l)) in tasks.iter().zip(&self.assignments) {
            debug_assert_eq!(t.id, id);
            reward += t.reward(l);
            if l > 0 {
                cost += t.remaining_cost(l);
            }
            quant += quantize(t.reward(l), delta);
        }
        self.predicted_reward = reward;
        self.planned_cost = cost;
        self.quantized_reward = quant;
    }
}

/// Verify that running the assigned stages in rank order from `base` meets
/// every adjusted deadline. Tasks needing no further execution are exempt —
/// their work is already done, so the deadline test is moot.
///
/// Accumulation order matches the table build exactly, so a plan the table
/// accepted always passes.
pub fn check_edf_feasible(tasks: &[TaskView], depths: &[usize], base: f64) -> bool {
    debug_assert_eq!(tasks.len(), depths.len());
    let mut cum = 0.0_f64;
    for (t, &l) in tasks.iter().zip(depths) {
        if l == 0 {
            continue;
        }
        let cost = t.remaining_cost(l);
        cum += cost;
        if cost > 0.0 && base + cum > t.d_adj {
            return false;
        }
    }
    true
}

/// Quantized-reward DP table.
///
/// Row 0 is the empty prefix; row i covers tasks[..i]. `p` holds minimal
/// cumulative execution time per (row, reward column); `choice` the depth
/// picked (u32::MAX = column unreachable).
#[derive(Debug, Clone)]
pub struct DpTable {
    pub delta: f64,
    /// Instant the GPU becomes available; all feasibility tests are
    /// `base + cumulative ≤ d_adj`.
    pub base: f64,
    n: usize,
    width: usize,
    p: Vec<f64>,
    choice: Vec<u32>,
}

impl DpTable {
    /// Full build over `tasks` (must be sorted by (d_adj, id) ascending).
    /// Returns the table and the number of cells computed.
    pub fn build(tasks: &[TaskView], base: f64, delta: f64, mode: DropMode) -> (Self, u64) {
        debug_assert!(tasks.windows(2).all(|w| (w[0].d_adj, w[0].id) <= (w[1].d_adj, w[1].id)));
        let n = tasks.len();
        let width = Self::width_for(tasks, delta);
        let mut table = Self {
            delta,
            base,
            n,
            width,
            p: vec![f64::INFINITY; (n + 1) * width],
            choice: vec![u32::MAX; (n + 1) * width],
        };
        table.p[0] = 0.0;
        let cells = table.fill_rows(tasks, 1, mode);
        (table, cells)
    }

    /// Recompute rows `k..=N` after an arrival was inserted at rank `k`,
    /// reusing rows `< k` unchanged. Caller guarantees the first `k−1` tasks,
    /// `base`, and `delta` are identical to the state this table was built
    /// from; rows `< k` then stay bit-identical to a full rebuild.
    pub fn rebuild_from(&mut self, tasks: &[TaskView], k: usize, mode: DropMode) -> u64 {
        let n = tasks.len();
        if k > n && n == self.n {
            return 0;
        }
        let width = Self::width_for(tasks, self.delta);
        if width != self.width || n != self.n {
            let mut p = vec![f64::INFINITY; (n + 1) * width];
            let mut choice = vec![u32::MAX; (n + 1) * width];
            let keep = self.width.min(width);
            for i in 0..k.min(self.n + 1).min(n + 1) {
                p[i * width..i * width + keep].copy_from_slice(&self.p[i * self.width..i * self.width + keep]);
                choice[i * width..i * width + keep]
                    .copy_from_slice(&self.choice[i * self.width..i * self.width + keep]);
            }
            self.p = p;
            self.choice = choice;
            self.width = width;
            self.n = n;
        }
        self.fill_rows(tasks, k, mode)
    }

    fn width_for(tasks: &[TaskView], delta: f64) -> usize {
        let mut max_sum = 0u64;
        for t in tasks {
            // Mode does not matter for the width bound: only positive-depth
            // rewards contribute, and Allow is the superset of options.
            let q_max = t
                .depth_options(DropMode::Allow)
                .iter()
                .map(|&(_, _, r)| quantize(r, delta))
                .max()
                .unwrap_or(0);
            max_sum += q_max;
        }
        max_sum as usize + 1
    }

    fn fill_rows(&mut self, tasks: &[TaskView], from: usize, mode: DropMode) -> u64 {
        let width = self.width;
        for i in from..=self.n {
            let t = &tasks[i - 1];
            let opts: Vec<(u32, f64, u64)> = t
                .depth_options(mode)
                .iter()
                .map(|&(l, cost, r)| (l as u32, cost, quantize(r, self.delta)))
                .collect();
            for r in 0..width {
                let mut best = f64::INFINITY;
                let mut pick = u32::MAX;
                for &(depth, cost, q) in &opts {
                    let q = q as usize;
                    if q > r {
                        continue;
                    }
                    let prev = self.p[(i - 1) * width + (r - q)];
                    if !prev.is_finite() {
                        continue;
                    }
                    let cand = prev + cost;
                    // Options that consume no further GPU time are exempt:
                    // their work is already committed.
                    if cost > 0.0 && self.base + cand > t.d_adj {
                        continue;
                    }
                    if cand < best {
                        best = cand;
                        pick = depth;
                    }
                }
                self.p[i * width + r] = best;
                self.choice[i * width + r] = pick;
            }
        }
        (self.n + 1 - from.min(self.n + 1)) as u64 * width as u64
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// P(i, r): minimal cumulative execution time; ∞ if unreachable.
    pub fn p(&self, i: usize, r: usize) -> f64 {
        self.p[i * self.width + r]
    }

    /// S(i, r): depth chosen for task i, or None if unreachable.
    pub fn choice_at(&self, i: usize, r: usize) -> Option<usize> {
        match self.choice[i * self.width + r] {
            u32::MAX => None,
            l => Some(l as usize),
        }
    }

    pub fn rows(&self) -> &[f64] {
        &self.p
    }

    pub fn choices(&self) -> &[u32] {
        &self.choice
    }

    /// Backtrack from the largest reachable reward column.
    pub fn extract_plan(&self, tasks: &[TaskView], mode: DropMode) -> Result<DepthPlan> {
        debug_assert_eq!(tasks.len(), self.n);
        if self.n == 0 {
            return Ok(DepthPlan::empty());
        }
        let last = self.n * self.width;
        let r_star = (0..self.width)
            .rev()
            .find(|&r| self.p[last + r].is_finite());
        let Some(r_star) = r_star else {
            debug_assert_eq!(mode, DropMode::Mandatory);
            return Err(Error::InfeasibleMandatory);
        };
        let mut depths = vec![0usize; self.n];
        let mut r = r_star;
        for i in (1..=self.n).rev() {
            let l = self.choice[i * self.width + r] as usize;
            debug_assert_ne!(l, u32::MAX as usize, "finite cell without a choice");
            depths[i - 1] = l;
            r -= quantize(tasks[i - 1].reward(l), self.delta) as usize;
        }
        debug_assert_eq!(r, 0, "backtrack must land on the empty prefix");
        let mut plan = DepthPlan {
            assignments: tasks.iter().zip(&depths).map(|(t, &l)| (t.id, l)).collect(),
            quantized_reward: r_star as u64,
            predicted_reward: 0.0,
            planned_cost: 0.0,
        };
        plan.refresh_value(tasks, self.delta);
        plan.quantized_reward = r_star as u64;
        Ok(plan)
    }
}

/// Outcome of a greedy budget handoff.
#[derive(Debug, Clone)]
pub struct ReassignResult {
    pub plan: DepthPlan,
    /// (task, depth) pairs examined — the work measure for overhead models.
    pub candidates: u64,
    pub swapped: bool,
}

/// After a stage of `head` completes with a lower confidence than predicted,
/// try to hand its remaining planned execution time to another task.
///
/// `tasks` must carry head's re-predicted curve; `old_curve` is the one the
/// current plan was made with. The plan is kept unless some other task's
/// extension (a) fits in the budget head would release, (b) stays
/// deadline-feasible for everyone, and (c) gains strictly more reward than
/// head itself would by continuing.
pub fn greedy_reassign(
    plan: &DepthPlan,
    tasks: &[TaskView],
    head: JobId,
    old_curve: &RewardCurve,
    base: f64,
    mode: DropMode,
    delta: f64,
) -> ReassignResult {
    let unchanged = |candidates| ReassignResult { plan: plan.clone(), candidates, swapped: false };
    debug_assert_eq!(plan.assignments.len(), tasks.len());
    let Some(h) = tasks.iter().position(|t| t.id == head) else {
        return unchanged(0);
    };
    let l1 = tasks[h].committed;
    let l1_star = plan.assignments[h].1;
    if l1_star <= l1 {
        return unchanged(0);
    }
    // On-track or better: the plan keeps its value, leave it alone.
    if tasks[h].curve.at(l1_star) >= old_curve.at(l1_star) {
        return unchanged(0);
    }
    let trunc = tasks[h].positive_floor(mode);
    debug_assert!(trunc <= l1_star);
    let budget = tasks[h].cum_exec[l1_star] - tasks[h].cum_exec[trunc];
    let head_gain = tasks[h].curve.at(l1_star) - tasks[h].curve.at(trunc);

    let mut candidates = 0u64;
    let mut best: Option<(usize, usize, f64)> = None;
    let mut trial: Vec<usize> = plan.assignments.iter().map(|&(_, l)| l).collect();
    for (j, t) in tasks.iter().enumerate() {
        if j == h {
            continue;
        }
        let lj_star = plan.assignments[j].1;
        let lo = (lj_star + 1).max(t.positive_floor(mode).max(1));
        for l in lo..=t.total_depth() {
            candidates += 1;
            let extra = t.cum_exec[l] - t.cum_exec[lj_star];
            if extra > budget {
                continue;
            }
            let gain = t.reward(l) - t.reward(lj_star);
            if gain <= head_gain {
                continue;
            }
            if let Some((_, _, g)) = best {
                if gain <= g {
                    continue;
                }
            }
            trial[h] = trunc;
            trial[j] = l;
            let ok = check_edf_feasible(tasks, &trial, base);
            trial[h] = l1_star;
            trial[j] = lj_star;
            if ok {
                best = Some((j, l, gain));
            }
        }
    }
    let Some((j, l, _)) = best else {
        return unchanged(candidates);
    };
    let mut plan = plan.clone();
    plan.assignments[h].1 = trunc;
    plan.assignments[j].1 = l;
    plan.refresh_value(tasks, delta);
    ReassignResult { plan, candidates, swapped: true }
}

/// Planner configuration shared by the simulator and CLI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub quant: QuantConfig,
    pub drop_mode: DropMode,
    pub model: UtilityModel,
    /// Reward assumed for depth 1 before anything has run.
    pub prior: f64,
    /// Enable the greedy budget handoff on stage completions.
    pub reassign: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            quant: QuantConfig::Delta(0.1),
            drop_mode: DropMode::Allow,
            model: UtilityModel::Exp,
            prior: 0.1,
            reassign: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerStats {
    pub full_builds: u64,
    pub incremental_builds: u64,
    pub cells_built: u64,
    pub reassign_calls: u64,
    pub reassign_swaps: u64,
    pub reassign_candidates: u64,
    pub infeasible_fallbacks: u64,
}

/// What one planner invocation did, for overhead accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanOutcome {
    /// Table cells computed (arrivals) or candidates examined (completions).
    pub cells: u64,
    pub incremental: bool,
    pub swapped: bool,
}

/// Event-driven planner state: active tasks sorted by adjusted deadline, the
/// current plan, and (when reusable) the DP table from the last arrival.
#[derive(Debug)]
pub struct PlannerState {
    cfg: PlannerConfig,
    tasks: Vec<TaskView>,
    jobs: Vec<(Job, usize)>,
    table: Option<DpTable>,
    /// Table mirrors `tasks` exactly (same order, same fields).
    synced: bool,
    plan: DepthPlan,
    last_delta: f64,
    stats: PlannerStats,
}

impl PlannerState {
    pub fn new(cfg: PlannerConfig) -> Self {
        let last_delta = match cfg.quant {
            QuantConfig::Delta(d) => d,
            QuantConfig::Epsilon(_) => 1.0,
        };
        Self {
            cfg,
            tasks: Vec::new(),
            jobs: Vec::new(),
            table: None,
            synced: false,
            plan: DepthPlan::empty(),
            last_delta,
            stats: PlannerStats::default(),
        }
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    pub fn plan(&self) -> &DepthPlan {
        &self.plan
    }

    pub fn planned_depth(&self, id: JobId) -> Option<usize> {
        self.plan.depth_of(id)
    }

    pub fn tasks(&self) -> &[TaskView] {
        &self.tasks
    }

    pub fn stats(&self) -> PlannerStats {
        self.stats
    }

    pub fn delta_in_use(&self) -> f64 {
        self.last_delta
    }

    /// The live DP table, when one has been built and mirrors `tasks`.
    pub fn table(&self) -> Option<&DpTable> {
        self.table.as_ref().filter(|_| self.synced)
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    fn index_of(&self, id: JobId) -> Option<usize> {
        self.tasks.iter().position(|t| t.id == id)
    }

    /// Admit a job and replan. `avail` is the instant the GPU next becomes
    /// free; reuse of earlier table rows requires the same `avail` and Δ as
    /// the last build, which holds for simultaneous arrival bursts under a
    /// fixed quantum.
    pub fn on_arrival(&mut self, adj: &AdjustedJob, avail: f64) -> Result<PlanOutcome> {
        let curve = self.cfg.model.predict_curve(&adj.job, 0, self.cfg.prior)?;
        let view = TaskView::from_adjusted(adj, curve);
        let key = (view.d_adj, view.id);
        let idx = self
            .tasks
            .partition_point(|t| (t.d_adj, t.id) <= key);
        self.tasks.insert(idx, view);
        self.jobs.insert(idx, (adj.job.clone(), 0));

        let delta = self.cfg.quant.resolve(&self.tasks, avail, self.cfg.drop_mode);
        let incremental = self.synced
            && self
                .table
                .as_ref()
                .is_some_and(|t| t.base == avail && t.delta == delta);
        let cells = if incremental {
            let table = self.table.as_mut().unwrap();
            let cells = table.rebuild_from(&self.tasks, idx + 1, self.cfg.drop_mode);
            self.stats.incremental_builds += 1;
            cells
        } else {
            let (table, cells) = DpTable::build(&self.tasks, avail, delta, self.cfg.drop_mode);
            self.table = Some(table);
            self.synced = true;
            self.stats.full_builds += 1;
            cells
        };
        self.stats.cells_built += cells;
        self.last_delta = delta;
        self.refresh_plan()?;
        Ok(PlanOutcome { cells, incremental, swapped: false })
    }

    fn refresh_plan(&mut self) -> Result<()> {
        let table = self.table.as_ref().expect("plan refresh without a table");
        let base = table.base;
        match table.extract_plan(&self.tasks, self.cfg.drop_mode) {
            Ok(plan) => {
                self.plan = plan;
                Ok(())
            }
            Err(Error::InfeasibleMandatory) => {
                self.stats.infeasible_fallbacks += 1;
                self.plan = self.infeasible_fallback(base);
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    /// The mandatory load does not fit. Reject tasks whose own remaining
    /// mandatory work already overruns their deadline (they keep whatever
    /// depth is sunk) and replan the rest; if even those cannot coexist,
    /// pin everyone at the minimum depth and miss honestly.
    fn infeasible_fallback(&mut self, base: f64) -> DepthPlan {
        let mode = self.cfg.drop_mode;
        let admitted: Vec<TaskView> = self
            .tasks
            .iter()
            .filter(|t| {
                let cost = t.remaining_cost(t.positive_floor(mode));
                cost == 0.0 || base + cost <= t.d_adj
            })
            .cloned()
            .collect();
        let subset = if admitted.len() < self.tasks.len() {
            let (table, cells) = DpTable::build(&admitted, base, self.last_delta, mode);
            self.stats.cells_built += cells;
            table.extract_plan(&admitted, mode).ok()
        } else {
            None
        };
        let mut plan = DepthPlan {
            assignments: self
                .tasks
                .iter()
                .map(|t| match &subset {
                    Some(sub) => (t.id, sub.depth_of(t.id).unwrap_or(t.committed)),
                    None => (t.id, t.positive_floor(mode)),
                })
                .collect(),
            quantized_reward: 0,
            predicted_reward: 0.0,
            planned_cost: 0.0,
        };
        plan.refresh_value(&self.tasks, self.last_delta);
        plan
    }

    /// Mark one more stage of `id` as dispatched (running).
    pub fn on_dispatch(&mut self, id: JobId) {
        let idx = self.index_of(id).expect("dispatch for unknown task");
        let t = &mut self.tasks[idx];
        assert!(t.committed < t.total_depth(), "dispatch beyond final stage");
        t.committed += 1;
        self.synced = false;
    }

    /// A stage of `id` finished and its exit confidence is now observed.
    /// Re-predicts the task's curve and, when the observation came in below
    /// prediction, tries the greedy budget handoff.
    pub fn on_stage_complete(&mut self, id: JobId, avail: f64) -> Result<PlanOutcome> {
        let idx = self.index_of(id).expect("completion for unknown task");
        let (job, observed) = &mut self.jobs[idx];
        *observed += 1;
        let observed = *observed;
        debug_assert_eq!(self.tasks[idx].committed, observed);
        let old_curve =
            std::mem::replace(&mut self.tasks[idx].curve, self.cfg.model.predict_curve(job, observed, self.cfg.prior)?);
        self.synced = false;
        if !self.cfg.reassign {
            return Ok(PlanOutcome { cells: 0, incremental: false, swapped: false });
        }
        self.stats.reassign_calls += 1;
        let result = greedy_reassign(
            &self.plan,
            &self.tasks,
            id,
            &old_curve,
            avail,
            self.cfg.drop_mode,
            self.last_delta,
        );
        self.stats.reassign_candidates += result.candidates;
        if result.swapped {
            self.stats.reassign_swaps += 1;
        }
        self.plan = result.plan;
        Ok(PlanOutcome { cells: result.candidates, incremental: false, swapped: result.swapped })
    }

    /// Remove a task that returned, expired, or was dropped.
    pub fn retire(&mut self, id: JobId) {
        if let Some(idx) = self.index_of(id) {
            self.tasks.remove(idx);
            self.jobs.remove(idx);
            self.plan.assignments.retain(|&(j, _)| j != id);
            self.synced = false;
        }
    }
}
