//! Randomized cross-checks of the quantized planner against the exact
//! oracle, shared by `validate` on the CLI and the acceptance tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::oracle::{brute_force, DEFAULT_CAP};
use crate::planner::{
    check_edf_feasible, choose_delta, quantize, DpTable, DropMode, PlannerConfig, PlannerState,
    QuantConfig, TaskView,
};
use crate::task::{Job, JobId, StageProfile};
use crate::utility::{RewardCurve, UtilityModel};

/// Slack for the (1−ε) bound; covers float summation only, not model error.
pub const FPTAS_SLACK: f64 = 1e-12;
/// Tolerance for aligned-quantum reward equality (sums reassociate).
pub const ALIGNED_TOL: f64 = 1e-9;

/// One random planner instance: ≤ 6 tasks, ≤ 4 stages, mandatory depth 1,
/// sorted by adjusted deadline. `aligned` snaps every curve value to the
/// 0.1 grid so quantization at Δ = 0.1 is lossless.
pub fn random_instance(rng: &mut ChaCha8Rng, aligned: bool) -> Vec<TaskView> {
    let n = rng.random_range(1..=6);
    let mut tasks: Vec<TaskView> = (0..n)
        .map(|i| {
            let depth = rng.random_range(1..=4);
            let mut cum_exec = vec![0.0];
            for _ in 0..depth {
                let w: f64 = rng.random_range(0.1..0.9);
                cum_exec.push(cum_exec.last().unwrap() + w);
            }
            TaskView {
                id: JobId(i as u64),
                d_adj: rng.random_range(0.3..3.0),
                cum_exec,
                mandatory: 1,
                committed: 0,
                curve: random_curve(rng, depth, aligned),
            }
        })
        .collect();
    tasks.sort_by(|a, b| a.d_adj.total_cmp(&b.d_adj).then_with(|| a.id.cmp(&b.id)));
    tasks
}

fn random_curve(rng: &mut ChaCha8Rng, depth: usize, aligned: bool) -> RewardCurve {
    let mut values = Vec::with_capacity(depth);
    if aligned {
        let mut k: u32 = rng.random_range(1..=6);
        for _ in 0..depth {
            values.push(k as f64 / 10.0);
            k = (k + rng.random_range(0..=2)).min(10);
        }
    } else {
        let mut r: f64 = rng.random_range(0.05..0.6);
        for _ in 0..depth {
            values.push(r);
            r = (r + rng.random_range(0.0..0.25)).min(1.0);
        }
    }
    RewardCurve::from_values(values)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BoundReport {
    pub instances: u64,
    /// (instance, ε) pairs evaluated.
    pub checks: u64,
    /// Times the planner fell below (1−ε)·opt − FPTAS_SLACK.
    pub violations: u64,
    /// Plans whose selected stages overran an adjusted deadline.
    pub infeasible_plans: u64,
    /// Worst planner/opt ratio seen (1.0 when nothing positive existed).
    pub worst_ratio: f64,
}

/// Criterion: for every instance and ε, the quantized plan collects at least
/// (1−ε) of the exact optimum, and never schedules past a deadline.
pub fn run_bound_suite(instances: u64, epsilons: &[f64], seed: u64) -> Result<BoundReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = BoundReport { instances, worst_ratio: 1.0, ..Default::default() };
    for _ in 0..instances {
        let tasks = random_instance(&mut rng, false);
        let opt = brute_force(&tasks, 0.0, DropMode::Allow, DEFAULT_CAP)?;
        for &eps in epsilons {
            let delta = choose_delta(eps, &tasks, 0.0, DropMode::Allow);
            let (table, _) = DpTable::build(&tasks, 0.0, delta, DropMode::Allow);
            let plan = table.extract_plan(&tasks, DropMode::Allow)?;
            let depths: Vec<usize> = plan.assignments.iter().map(|&(_, l)| l).collect();
            if !check_edf_feasible(&tasks, &depths, 0.0) {
                report.infeasible_plans += 1;
            }
            if plan.predicted_reward + FPTAS_SLACK < (1.0 - eps) * opt.reward {
                report.violations += 1;
            }
            if opt.reward > 0.0 {
                report.worst_ratio = report.worst_ratio.min(plan.predicted_reward / opt.reward);
            }
            report.checks += 1;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AlignedReport {
    pub instances: u64,
    /// Instances where the quantized plan value differed from the optimum.
    pub mismatches: u64,
    pub max_abs_err: f64,
}

/// Criterion: with every curve value on the Δ grid, quantization loses
/// nothing — the plan matches the oracle exactly (integer-quantized equality,
/// float equality within ALIGNED_TOL).
pub fn run_aligned_suite(instances: u64, seed: u64) -> Result<AlignedReport> {
    const DELTA: f64 = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = AlignedReport { instances, ..Default::default() };
    for _ in 0..instances {
        let tasks = random_instance(&mut rng, true);
        let opt = brute_force(&tasks, 0.0, DropMode::Allow, DEFAULT_CAP)?;
        let (table, _) = DpTable::build(&tasks, 0.0, DELTA, DropMode::Allow);
        let plan = table.extract_plan(&tasks, DropMode::Allow)?;
        let q_opt: u64 = tasks
            .iter()
            .zip(&opt.assignment)
            .map(|(t, &(id, l))| {
                debug_assert_eq!(t.id, id);
                quantize(t.reward(l), DELTA)
            })
            .sum();
        let err = (plan.predicted_reward - opt.reward).abs();
        report.max_abs_err = report.max_abs_err.max(err);
        if plan.quantized_reward != q_opt || err > ALIGNED_TOL {
            report.mismatches += 1;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IncrementalReport {
    pub sequences: u64,
    pub arrivals: u64,
    /// Arrivals whose resulting table differed from a from-scratch build.
    pub mismatches: u64,
    /// Arrivals served by a partial rebuild (rows below the insertion rank
    /// reused); the rest were full rebuilds.
    pub partial_rebuilds: u64,
}

/// Criterion: after every arrival the planner's table — however it was
/// produced — is bit-identical to a from-scratch build over the same tasks.
/// Burst sequences share one arrival instant to exercise the partial-rebuild
/// path; staggered sequences move the GPU-availability base and force full
/// rebuilds.
pub fn run_incremental_suite(sequences: u64, seed: u64) -> Result<IncrementalReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = IncrementalReport { sequences, ..Default::default() };
    for s in 0..sequences {
        let burst = s % 2 == 0;
        let mut planner = PlannerState::new(PlannerConfig {
            quant: QuantConfig::Delta(0.1),
            drop_mode: DropMode::Allow,
            model: UtilityModel::Exp,
            prior: 0.3,
            reassign: true,
        });
        let mut now = 0.0;
        for i in 0..rng.random_range(2..=8u64) {
            if !burst {
                now += rng.random_range(0.0..0.5);
            }
            let depth = rng.random_range(1..=4);
            let mut conf: f64 = rng.random_range(0.2..0.6);
            let stages: Vec<StageProfile> = (0..depth)
                .map(|_| {
                    let s = StageProfile {
                        wcet: rng.random_range(0.05..0.3),
                        confidence: conf,
                        correct: rng.random_bool(conf.clamp(0.0, 1.0)),
                    };
                    conf = (conf + rng.random_range(0.0..0.2)).min(1.0);
                    s
                })
                .collect();
            let job = Job::new(
                JobId(s * 100 + i),
                now,
                rng.random_range(0.5..5.0),
                stages,
                1,
            )?;
            let adj = job.adjust(0.0);
            let outcome = planner.on_arrival(&adj, now)?;
            if outcome.incremental {
                report.partial_rebuilds += 1;
            }
            let live = planner.table().expect("table exists after an arrival");
            let (fresh, _) =
                DpTable::build(planner.tasks(), live.base, live.delta, DropMode::Allow);
            let same = live.n() == fresh.n()
                && live.width() == fresh.width()
                && live.rows() == fresh.rows()
                && live.choices() == fresh.choices();
            if !same {
                report.mismatches += 1;
            }
            report.arrivals += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_suite_holds_on_a_small_run() {
        let r = run_bound_suite(100, &[0.1, 0.25, 0.5], 7).unwrap();
        assert_eq!(r.violations, 0, "worst ratio {}", r.worst_ratio);
        assert_eq!(r.infeasible_plans, 0);
        assert_eq!(r.checks, 300);
    }

    #[test]
    fn aligned_suite_is_exact_on_a_small_run() {
        let r = run_aligned_suite(100, 11).unwrap();
        assert_eq!(r.mismatches, 0, "max err {}", r.max_abs_err);
    }

    #[test]
    fn incremental_suite_matches_scratch_builds() {
        let r = run_incremental_suite(40, 13).unwrap();
        assert_eq!(r.mismatches, 0);
        assert!(r.partial_rebuilds > 0, "partial path never exercised");
    }

    #[test]
    fn random_instances_are_sorted_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let tasks = random_instance(&mut rng, true);
            assert!(tasks
                .windows(2)
                .all(|w| (w[0].d_adj, w[0].id) <= (w[1].d_adj, w[1].id)));
            for t in &tasks {
                let c = t.curve.as_slice();
                assert!(c.windows(2).all(|w| w[1] >= w[0]));
                assert!(c.iter().all(|&v| (0.0..=1.0).contains(&v)));
                assert!((v_grid(c)), "off-grid aligned curve: {c:?}");
            }
        }
    }

    fn v_grid(c: &[f64]) -> bool {
        c.iter().all(|&v| {
            let k = (v * 10.0).round();
            (v - k / 10.0).abs() < 1e-12
        })
    }
}
