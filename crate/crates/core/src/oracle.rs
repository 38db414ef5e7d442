//! Exhaustive depth-assignment search for small instances: the ground truth
//! the quantized planner is measured against.
//!
//! Enumerates every depth vector (skips included where allowed), keeps only
//! deadline-feasible ones, and maximizes the exact, unquantized reward. The
//! feasibility test uses the same accumulation order and comparisons as the
//! planner, so the two never disagree about what fits.

use crate::error::{Error, Result};
use crate::planner::{DropMode, TaskView};
use crate::task::JobId;

/// Enumeration guard: instances with more candidate vectors than this are
/// rejected rather than ground through.
pub const DEFAULT_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Exact maximal total reward over all feasible assignments.
    pub reward: f64,
    /// One maximizing assignment, in (d_adj, id) order. Ties resolve to the
    /// lexicographically smallest depth vector in option order.
    pub assignment: Vec<(JobId, usize)>,
    /// Complete feasible assignments evaluated.
    pub examined: u64,
}

/// Brute-force optimum. Input order does not matter; tasks are sorted by
/// (d_adj, id) internally. `base` is the instant the GPU becomes available.
pub fn brute_force(
    tasks: &[TaskView],
    base: f64,
    mode: DropMode,
    cap: u128,
) -> Result<OracleResult> {
    let mut sorted: Vec<TaskView> = tasks.to_vec();
    sorted.sort_by(|a, b| {
        a.d_adj
            .total_cmp(&b.d_adj)
            .then_with(|| a.id.cmp(&b.id))
    });
    let options: Vec<Vec<(usize, f64, f64)>> =
        sorted.iter().map(|t| t.depth_options(mode)).collect();
    let mut combos: u128 = 1;
    for opts in &options {
        combos = combos.saturating_mul(opts.len().max(1) as u128);
        if combos > cap {
            return Err(Error::InstanceTooLarge { combinations: combos, cap });
        }
    }

    let mut search = Search {
        sorted: &sorted,
        options: &options,
        base,
        best_reward: f64::NEG_INFINITY,
        best_depths: Vec::new(),
        depths: vec![0; sorted.len()],
        examined: 0,
    };
    search.descend(0, 0.0, 0.0);
    if search.examined == 0 {
        debug_assert_eq!(mode, DropMode::Mandatory);
        return Err(Error::InfeasibleMandatory);
    }
    Ok(OracleResult {
        reward: search.best_reward,
        assignment: sorted
            .iter()
            .zip(&search.best_depths)
            .map(|(t, &l)| (t.id, l))
            .collect(),
        examined: search.examined,
    })
}

struct Search<'a> {
    sorted: &'a [TaskView],
    options: &'a [Vec<(usize, f64, f64)>],
    base: f64,
    best_reward: f64,
    best_depths: Vec<usize>,
    depths: Vec<usize>,
    examined: u64,
}

impl Search<'_> {
    fn descend(&mut self, i: usize, cum: f64, reward: f64) {
        if i == self.sorted.len() {
            self.examined += 1;
            if reward > self.best_reward {
                self.best_reward = reward;
                self.best_depths = self.depths.clone();
            }
            return;
        }
        for &(depth, cost, r) in &self.options[i] {
            let cum_next = cum + cost;
            // Same exemption as the planner: already-committed work owes
            // nothing to the deadline.
            if cost > 0.0 && self.base + cum_next > self.sorted[i].d_adj {
                continue;
            }
            self.depths[i] = depth;
            self.descend(i + 1, cum_next, reward + r);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{choose_delta, quantize, DpTable};
    use crate::utility::RewardCurve;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn view(id: u64, d_adj: f64, wcets: &[f64], curve: &[f64]) -> TaskView {
        let mut cum = vec![0.0];
        let mut acc = 0.0;
        for &w in wcets {
            acc += w;
            cum.push(acc);
        }
        TaskView {
            id: JobId(id),
            d_adj,
            cum_exec: cum,
            mandatory: 1,
            committed: 0,
            curve: RewardCurve::from_values(curve.to_vec()),
        }
    }

    #[test]
    fn single_task_takes_the_deepest_feasible_exit() {
        let t = view(1, 10.0, &[1.0, 1.0], &[0.4, 0.7]);
        let res = brute_force(&[t], 0.0, DropMode::Allow, DEFAULT_CAP).unwrap();
        assert_relative_eq!(res.reward, 0.7);
        assert_eq!(res.assignment, vec![(JobId(1), 2)]);
    }

    #[test]
    fn two_task_instance_matches_planner_example() {
        let tasks = vec![
            view(1, 1.0, &[1.0], &[0.5]),
            view(2, 3.0, &[1.0, 1.0], &[0.4, 0.8]),
        ];
        let res = brute_force(&tasks, 0.0, DropMode::Allow, DEFAULT_CAP).unwrap();
        assert_relative_eq!(res.reward, 1.3);
        assert_eq!(res.assignment, vec![(JobId(1), 1), (JobId(2), 2)]);
    }

    #[test]
    fn forced_mandatory_sums_mandatory_rewards() {
        // Only depth 1 of each fits; deeper choices blow the deadlines.
        let tasks = vec![
            view(1, 1.0, &[1.0, 5.0], &[0.3, 0.9]),
            view(2, 2.0, &[1.0, 5.0], &[0.4, 0.95]),
        ];
        let res = brute_force(&tasks, 0.0, DropMode::Mandatory, DEFAULT_CAP).unwrap();
        assert_relative_eq!(res.reward, 0.7);
        assert_eq!(res.assignment, vec![(JobId(1), 1), (JobId(2), 1)]);
    }

    #[test]
    fn input_order_does_not_matter() {
        let a = view(1, 2.0, &[0.5, 0.8], &[0.3, 0.6]);
        let b = view(2, 1.0, &[0.6], &[0.5]);
        let c = view(3, 3.0, &[0.4, 0.4, 0.4], &[0.2, 0.5, 0.9]);
        let fwd = brute_force(&[a.clone(), b.clone(), c.clone()], 0.0, DropMode::Allow, DEFAULT_CAP)
            .unwrap();
        let rev = brute_force(&[c, b, a], 0.0, DropMode::Allow, DEFAULT_CAP).unwrap();
        assert_eq!(fwd.reward.to_bits(), rev.reward.to_bits());
        assert_eq!(fwd.assignment, rev.assignment);
    }

    #[test]
    fn oversized_instances_are_rejected() {
        // 25 tasks with skip + 4 depths each: 5^25 vectors.
        let tasks: Vec<TaskView> = (0..25)
            .map(|i| view(i, 100.0, &[0.1, 0.1, 0.1, 0.1], &[0.2, 0.4, 0.6, 0.8]))
            .collect();
        assert!(matches!(
            brute_force(&tasks, 0.0, DropMode::Allow, DEFAULT_CAP),
            Err(Error::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn committed_work_counts_even_past_the_deadline() {
        let mut t = view(1, 0.5, &[0.4, 0.4], &[0.3, 0.7]);
        t.committed = 1;
        // Deadline already passed: stopping at depth 1 keeps the sunk 0.3.
        let res = brute_force(&[t], 1.0, DropMode::Allow, DEFAULT_CAP).unwrap();
        assert_relative_eq!(res.reward, 0.3);
        assert_eq!(res.assignment, vec![(JobId(1), 1)]);
    }

    fn random_tasks(rng: &mut ChaCha8Rng, aligned: bool) -> Vec<TaskView> {
        let n = rng.random_range(1..=4);
        (0..n)
            .map(|i| {
                let depth = rng.random_range(1..=4);
                let wcets: Vec<f64> = (0..depth).map(|_| rng.random_range(0.1..0.9)).collect();
                let mut q = 0u32;
                let mut level = 0.0_f64;
                let curve: Vec<f64> = (0..depth)
                    .map(|_| {
                        if aligned {
                            q = (q + rng.random_range(0..=3)).min(10);
                            f64::from(q) / 10.0
                        } else {
                            level += rng.random_range(0.0..(1.0 - level).max(1e-9));
                            level.min(1.0)
                        }
                    })
                    .collect();
                view(i as u64, rng.random_range(0.3..3.0), &wcets, &curve)
            })
            .collect()
    }

    #[test]
    fn planner_is_exact_when_rewards_sit_on_the_quantum_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..120 {
            let mut tasks = random_tasks(&mut rng, true);
            tasks.sort_by(|a, b| a.d_adj.total_cmp(&b.d_adj).then_with(|| a.id.cmp(&b.id)));
            let opt = brute_force(&tasks, 0.0, DropMode::Allow, DEFAULT_CAP).unwrap();
            let (table, _) = DpTable::build(&tasks, 0.0, 0.1, DropMode::Allow);
            let plan = table.extract_plan(&tasks, DropMode::Allow).unwrap();
            assert!(
                (plan.predicted_reward - opt.reward).abs() <= 1e-9,
                "aligned quanta must be exact: plan {} vs opt {}",
                plan.predicted_reward,
                opt.reward
            );
            let opt_quant: u64 = tasks
                .iter()
                .zip(&opt.assignment)
                .map(|(t, &(_, l))| quantize(t.reward(l), 0.1))
                .sum();
            assert_eq!(plan.quantized_reward, opt_quant);
        }
    }

    #[test]
    fn planner_meets_the_approximation_bound_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..120 {
            let mut tasks = random_tasks(&mut rng, false);
            tasks.sort_by(|a, b| a.d_adj.total_cmp(&b.d_adj).then_with(|| a.id.cmp(&b.id)));
            let opt = brute_force(&tasks, 0.0, DropMode::Allow, DEFAULT_CAP).unwrap();
            for eps in [0.1, 0.25, 0.5] {
                let delta = choose_delta(eps, &tasks, 0.0, DropMode::Allow);
                let (table, _) = DpTable::build(&tasks, 0.0, delta, DropMode::Allow);
                let plan = table.extract_plan(&tasks, DropMode::Allow).unwrap();
                assert!(
                    plan.predicted_reward >= (1.0 - eps) * opt.reward - 1e-12,
                    "bound violated: eps={eps} plan={} opt={}",
                    plan.predicted_reward,
                    opt.reward
                );
            }
        }
    }
}
