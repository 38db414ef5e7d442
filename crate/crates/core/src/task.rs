//! Core task model: multi-stage inference jobs, deadlines, and the deadline
//! adjustment that compensates for non-preemptive stage execution.
//!
//! A job is an inference request whose network is split into stages. Each
//! stage runs to completion once dispatched, so earliest-deadline-first
//! dispatch stays (approximately) valid only after one worst-case stage time
//! and the CPU-side constant have been subtracted from every deadline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque job identifier, unique within one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JobId(pub u64);

impl std::fmt::Display for JobId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "J{}", self.0)
    }
}

/// One network stage: its worst-case execution time plus the realized
/// (trace) exit-classifier outputs for the request this job carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageProfile {
    /// Worst-case execution time in seconds, > 0.
    pub wcet: f64,
    /// Realized classifier confidence at this exit, in [0, 1].
    pub confidence: f64,
    /// Whether this exit's prediction matches ground truth.
    pub correct: bool,
}

impl StageProfile {
    pub fn new(wcet: f64, confidence: f64, correct: bool) -> Result<Self> {
        if !(wcet > 0.0) {
            return Err(Error::Validation(format!("stage wcet must be > 0, got {wcet}")));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Validation(format!(
                "stage confidence must be in [0,1], got {confidence}"
            )));
        }
        Ok(Self { wcet, confidence, correct })
    }
}

/// An inference request: arrival time, relative deadline, ordered stages,
/// and the mandatory depth that must run when dropping is disallowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: JobId,
    /// Arrival timestamp in seconds.
    pub arrival: f64,
    /// Relative deadline in seconds.
    pub rel_deadline: f64,
    /// Stages in execution order; non-empty.
    pub stages: Vec<StageProfile>,
    /// Mandatory depth, 1-based, within [1, stages.len()].
    pub mandatory: usize,
}

impl Job {
    pub fn new(
        id: JobId,
        arrival: f64,
        rel_deadline: f64,
        stages: Vec<StageProfile>,
        mandatory: usize,
    ) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::Validation("job must have at least one stage".into()));
        }
        if mandatory == 0 || mandatory > stages.len() {
            return Err(Error::Validation(format!(
                "mandatory depth {mandatory} outside [1, {}]",
                stages.len()
            )));
        }
        Ok(Self { id, arrival, rel_deadline, stages, mandatory })
    }

    /// Number of stages L.
    pub fn depth(&self) -> usize {
        self.stages.len()
    }

    /// Absolute raw deadline: arrival + relative deadline.
    pub fn raw_deadline(&self) -> f64 {
        self.arrival + self.rel_deadline
    }

    /// Adjust the deadline for CPU-side overhead and one worst-case stage of
    /// non-preemption, and precompute cumulative stage times.
    ///
    /// The adjusted deadline may precede the arrival; such jobs stay
    /// admissible and simply miss downstream.
    pub fn adjust(&self, cpu_overhead: f64) -> AdjustedJob {
        debug_assert!(cpu_overhead >= 0.0);
        let max_stage = self.stages.iter().map(|s| s.wcet).fold(0.0_f64, f64::max);
        let d_adj = self.raw_deadline() - cpu_overhead - max_stage;
        let mut cum_exec = Vec::with_capacity(self.stages.len() + 1);
        cum_exec.push(0.0);
        let mut acc = 0.0;
        for s in &self.stages {
            acc += s.wcet;
            cum_exec.push(acc);
        }
        AdjustedJob { job: self.clone(), d_adj, cum_exec }
    }
}

/// A job together with its adjusted absolute deadline and the prefix sums
/// of stage execution times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedJob {
    pub job: Job,
    /// Raw deadline minus CPU overhead minus the job's largest stage wcet.
    pub d_adj: f64,
    /// cum_exec[l] = total wcet of the first l stages; cum_exec[0] = 0.
    pub cum_exec: Vec<f64>,
}

impl AdjustedJob {
    /// Cumulative execution time of the first `depth` stages.
    pub fn cumulative_exec(&self, depth: usize) -> Result<f64> {
        if depth == 0 || depth > self.job.depth() {
            return Err(Error::DepthOutOfRange { depth, max: self.job.depth() });
        }
        Ok(self.cum_exec[depth])
    }

    pub fn depth(&self) -> usize {
        self.job.depth()
    }
}

/// Convenience op form mirroring the adjustment contract.
pub fn adjust_deadline(job: &Job, cpu_overhead: f64) -> AdjustedJob {
    job.adjust(cpu_overhead)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn stages(wcets: &[f64]) -> Vec<StageProfile> {
        wcets
            .iter()
            .map(|&w| StageProfile::new(w, 0.5, true).unwrap())
            .collect()
    }

    #[test]
    fn adjust_subtracts_overhead_and_max_stage() {
        let job = Job::new(JobId(1), 0.0, 0.3, stages(&[0.02, 0.02, 0.02]), 1).unwrap();
        let adj = job.adjust(0.0);
        assert_relative_eq!(adj.d_adj, 0.28, epsilon = 1e-12);
    }

    #[test]
    fn adjusted_deadline_may_precede_arrival() {
        let job = Job::new(JobId(2), 1.0, 0.01, stages(&[0.02]), 1).unwrap();
        let adj = job.adjust(0.0);
        assert_relative_eq!(adj.d_adj, 0.99, epsilon = 1e-12);
        assert!(adj.d_adj < job.arrival);
    }

    #[test]
    fn adjust_matches_wide_deadline_formula() {
        // D_u = 0.8 with uneven stages: d_adj = arrival + 0.8 - overhead - max wcet
        let job = Job::new(JobId(3), 2.5, 0.8, stages(&[0.05, 0.08, 0.06]), 1).unwrap();
        let adj = job.adjust(0.01);
        assert_relative_eq!(adj.d_adj, 2.5 + 0.8 - 0.01 - 0.08, epsilon = 1e-12);
    }

    #[test]
    fn cumulative_exec_prefix_sums() {
        let job = Job::new(JobId(4), 0.0, 1.0, stages(&[0.02, 0.03, 0.05]), 1).unwrap();
        let adj = job.adjust(0.0);
        assert_relative_eq!(adj.cumulative_exec(1).unwrap(), 0.02, epsilon = 1e-12);
        assert_relative_eq!(adj.cumulative_exec(2).unwrap(), 0.05, epsilon = 1e-12);
        assert_relative_eq!(adj.cumulative_exec(3).unwrap(), 0.10, epsilon = 1e-12);
        assert!(matches!(
            adj.cumulative_exec(4),
            Err(Error::DepthOutOfRange { depth: 4, max: 3 })
        ));
        assert!(adj.cumulative_exec(0).is_err());
    }

    #[test]
    fn rejects_empty_stages_and_bad_mandatory() {
        assert!(Job::new(JobId(5), 0.0, 1.0, vec![], 1).is_err());
        assert!(Job::new(JobId(6), 0.0, 1.0, stages(&[0.02]), 2).is_err());
        assert!(Job::new(JobId(7), 0.0, 1.0, stages(&[0.02]), 0).is_err());
    }

    #[test]
    fn adjustment_preserves_deadline_order_for_equal_constants() {
        // Same stage profile across jobs, so the same constant is subtracted.
        let mk = |id, arrival, rel| {
            Job::new(JobId(id), arrival, rel, stages(&[0.02, 0.04]), 1).unwrap()
        };
        let a = mk(1, 0.0, 0.5).adjust(0.003);
        let b = mk(2, 0.1, 0.3).adjust(0.003);
        let c = mk(3, 0.2, 0.9).adjust(0.003);
        let raw_order = |j: &AdjustedJob| j.job.raw_deadline();
        let mut by_raw = [&a, &b, &c];
        by_raw.sort_by(|x, y| raw_order(x).total_cmp(&raw_order(y)));
        let mut by_adj = [&a, &b, &c];
        by_adj.sort_by(|x, y| x.d_adj.total_cmp(&y.d_adj));
        let ids_raw: Vec<_> = by_raw.iter().map(|j| j.job.id).collect();
        let ids_adj: Vec<_> = by_adj.iter().map(|j| j.job.id).collect();
        assert_eq!(ids_raw, ids_adj);
    }

    #[test]
    fn cumulative_exec_strictly_increasing() {
        let job = Job::new(JobId(8), 0.0, 1.0, stages(&[0.01, 0.05, 0.02, 0.04]), 1).unwrap();
        let adj = job.adjust(0.0);
        for l in 1..job.depth() {
            assert!(adj.cumulative_exec(l + 1).unwrap() > adj.cumulative_exec(l).unwrap());
        }
    }
}
