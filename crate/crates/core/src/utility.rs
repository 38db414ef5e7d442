//! Reward prediction for anytime inference: given the confidence observed at
//! the deepest completed exit, estimate the confidence the remaining exits
//! would produce.
//!
//! Three closed-form heuristics plus a trace oracle. All predictions live in
//! [0, 1] and are monotone in depth for monotone inputs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::Job;

/// How future exit confidence is extrapolated from the current one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UtilityModel {
    /// Assume the next exit is perfect: r' = 1.
    Max,
    /// Halve the remaining error: r' = r + (1 - r) / 2.
    Exp,
    /// Scale with depth: r' = min(1, r * (l + 1) / l).
    Lin,
    /// Read the realized trace confidences directly.
    Oracle,
}

impl UtilityModel {
    /// One-step prediction: expected confidence after one more stage, given
    /// the confidence `r_cur` observed at depth `depth_cur` (1-based).
    ///
    /// Oracle has no closed form; it must read the trace via `predict_curve`.
    pub fn predict_next(&self, r_cur: f64, depth_cur: usize) -> Result<f64> {
        if !(0.0..=1.0).contains(&r_cur) {
            return Err(Error::Validation(format!(
                "confidence must be in [0,1], got {r_cur}"
            )));
        }
        if depth_cur == 0 {
            return Err(Error::Validation("depth_cur must be >= 1".into()));
        }
        match self {
            UtilityModel::Max => Ok(1.0),
            UtilityModel::Exp => Ok(r_cur + 0.5 * (1.0 - r_cur)),
            UtilityModel::Lin => {
                let d = depth_cur as f64;
                Ok((r_cur * (d + 1.0) / d).min(1.0))
            }
            UtilityModel::Oracle => Err(Error::MissingOracle),
        }
    }

    /// Full predicted reward curve for a job.
    ///
    /// Depths `1..=observed_depth` carry the realized trace confidences (they
    /// are known once those exits have run). Later depths are extrapolated
    /// one step at a time. A job with nothing observed starts from `prior`
    /// at depth 1 (typically 1 / #classes).
    pub fn predict_curve(&self, job: &Job, observed_depth: usize, prior: f64) -> Result<RewardCurve> {
        let total = job.depth();
        if observed_depth > total {
            return Err(Error::Validation(format!(
                "observed depth {observed_depth} exceeds job depth {total}"
            )));
        }
        let mut values = Vec::with_capacity(total);
        for stage in &job.stages[..observed_depth] {
            values.push(stage.confidence);
        }
        match self {
            UtilityModel::Oracle => {
                for stage in &job.stages[observed_depth..] {
                    values.push(stage.confidence);
                }
            }
            _ => {
                if observed_depth == 0 && total >= 1 {
                    values.push(prior.clamp(0.0, 1.0));
                }
                while values.len() < total {
                    let depth = values.len();
                    let next = self.predict_next(values[depth - 1], depth)?;
                    values.push(next);
                }
            }
        }
        Ok(RewardCurve { values })
    }

    /// Uniform prior over `num_classes` labels.
    pub fn uniform_prior(num_classes: usize) -> f64 {
        assert!(num_classes >= 1);
        1.0 / num_classes as f64
    }
}

impl fmt::Display for UtilityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            UtilityModel::Max => "max",
            UtilityModel::Exp => "exp",
            UtilityModel::Lin => "lin",
            UtilityModel::Oracle => "oracle",
        };
        f.write_str(s)
    }
}

impl FromStr for UtilityModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(UtilityModel::Max),
            "exp" => Ok(UtilityModel::Exp),
            "lin" => Ok(UtilityModel::Lin),
            "oracle" => Ok(UtilityModel::Oracle),
            _ => Err(Error::Validation(format!("unknown utility model '{s}'"))),
        }
    }
}

/// Predicted (or realized) reward per depth, 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardCurve {
    values: Vec<f64>,
}

impl RewardCurve {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// Reward at `depth` (1-based). Panics outside [1, len].
    pub fn at(&self, depth: usize) -> f64 {
        assert!(depth >= 1 && depth <= self.values.len(), "depth {depth} out of range");
        self.values[depth - 1]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{JobId, StageProfile};
    use approx::assert_relative_eq;

    fn job_with_confs(confs: &[f64]) -> Job {
        let stages = confs
            .iter()
            .map(|&c| StageProfile::new(0.02, c, c > 0.5).unwrap())
            .collect();
        Job::new(JobId(0), 0.0, 1.0, stages, 1).unwrap()
    }

    #[test]
    fn exp_iterates_to_closed_form() {
        // k applications of r' = r + (1-r)/2 give 1 - (1-r)/2^k.
        for &r0 in &[0.0, 0.1, 0.37, 0.5, 0.93, 1.0] {
            let mut r = r0;
            for k in 1..=8 {
                r = UtilityModel::Exp.predict_next(r, k).unwrap();
                let expect = 1.0 - (1.0 - r0) / 2f64.powi(k as i32);
                assert_relative_eq!(r, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn lin_iterates_to_closed_form_until_clamp() {
        // From (r0, depth d), k unclamped applications give r0 * (d + k) / d.
        let r0 = 0.11;
        let d0 = 2usize;
        let mut r = r0;
        for k in 1..=6 {
            r = UtilityModel::Lin.predict_next(r, d0 + k - 1).unwrap();
            let expect = (r0 * (d0 + k) as f64 / d0 as f64).min(1.0);
            assert_relative_eq!(r, expect, epsilon = 1e-12);
        }
        // Clamp engages and sticks.
        let clamped = UtilityModel::Lin.predict_next(0.9, 2).unwrap();
        assert_relative_eq!(clamped, 1.0, epsilon = 1e-12);
        assert_relative_eq!(UtilityModel::Lin.predict_next(1.0, 5).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn max_always_predicts_one() {
        for &r in &[0.0, 0.42, 1.0] {
            assert_relative_eq!(UtilityModel::Max.predict_next(r, 3).unwrap(), 1.0);
        }
    }

    #[test]
    fn oracle_has_no_closed_form() {
        assert!(matches!(
            UtilityModel::Oracle.predict_next(0.5, 1),
            Err(Error::MissingOracle)
        ));
    }

    #[test]
    fn curve_seeds_from_prior_when_nothing_observed() {
        let job = job_with_confs(&[0.3, 0.6, 0.9]);
        let curve = UtilityModel::Exp.predict_curve(&job, 0, 0.1).unwrap();
        assert_relative_eq!(curve.at(1), 0.1, epsilon = 1e-12);
        assert_relative_eq!(curve.at(2), 0.55, epsilon = 1e-12);
        assert_relative_eq!(curve.at(3), 0.775, epsilon = 1e-12);
    }

    #[test]
    fn curve_uses_realized_prefix_then_extrapolates() {
        let job = job_with_confs(&[0.3, 0.6, 0.9, 0.95]);
        let curve = UtilityModel::Exp.predict_curve(&job, 2, 0.1).unwrap();
        assert_relative_eq!(curve.at(1), 0.3, epsilon = 1e-12);
        assert_relative_eq!(curve.at(2), 0.6, epsilon = 1e-12);
        assert_relative_eq!(curve.at(3), 0.8, epsilon = 1e-12);
        assert_relative_eq!(curve.at(4), 0.9, epsilon = 1e-12);
    }

    #[test]
    fn oracle_curve_copies_trace() {
        let job = job_with_confs(&[0.3, 0.6, 0.9]);
        let curve = UtilityModel::Oracle.predict_curve(&job, 1, 0.1).unwrap();
        assert_eq!(curve.as_slice(), &[0.3, 0.6, 0.9]);
    }

    #[test]
    fn model_names_round_trip() {
        for m in [UtilityModel::Max, UtilityModel::Exp, UtilityModel::Lin, UtilityModel::Oracle] {
            let back: UtilityModel = m.to_string().parse().unwrap();
            assert_eq!(back, m);
        }
        assert!("quadratic".parse::<UtilityModel>().is_err());
    }

    #[test]
    fn uniform_prior_matches_class_count() {
        assert_relative_eq!(UtilityModel::uniform_prior(10), 0.1, epsilon = 1e-12);
        assert_relative_eq!(UtilityModel::uniform_prior(2), 0.5, epsilon = 1e-12);
    }
}
