//! Scores, reward fractions and the split of the reward budget across the
//! inference, forecast and reputation tasks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::PotentialParams;
use crate::stats::{population_std, scale_by_std};

/// Added to the mean absolute deviation before inverting it into a reputer
/// score.
pub const DEFAULT_SCORE_FLOOR: f64 = 1e-3;

/// Number of tasks that share the budget.
pub const TASKS: usize = 3;

/// How much the network loss would rise if this participant were left out.
pub fn one_out_score(network_log_loss: f64, one_out_log_loss: f64) -> f64 {
    one_out_log_loss - network_log_loss
}

/// Stake-weighted mean of the reported loss vectors.
pub fn reputer_consensus(reported: &[Vec<f64>], stakes: &[f64]) -> Result<Vec<f64>> {
    let first = reported.first().ok_or(Error::Empty("reported losses"))?;
    if stakes.len() != reported.len() {
        return Err(Error::LengthMismatch {
            what: "reputer stakes",
            expected: reported.len(),
            found: stakes.len(),
        });
    }
    if let Some(&bad) = stakes.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::param("stake", bad, "must be positive"));
    }
    let total: f64 = stakes.iter().sum();
    let mut out = vec![0.0; first.len()];
    for (row, &s) in reported.iter().zip(stakes) {
        if row.len() != out.len() {
            return Err(Error::LengthMismatch {
                what: "reported loss vector",
                expected: out.len(),
                found: row.len(),
            });
        }
        for (o, v) in out.iter_mut().zip(row) {
            *o += s * v;
        }
    }
    for o in &mut out {
        *o /= total;
    }
    Ok(out)
}

/// `1 / (floor + mean |reported - consensus|)`.
pub fn reputer_score(reported: &[f64], consensus: &[f64], floor: f64) -> Result<f64> {
    if reported.is_empty() {
        return Err(Error::Empty("reported losses"));
    }
    if reported.len() != consensus.len() {
        return Err(Error::LengthMismatch {
            what: "consensus",
            expected: reported.len(),
            found: consensus.len(),
        });
    }
    let mad = reported
        .iter()
        .zip(consensus)
        .map(|(r, c)| (r - c).abs())
        .sum::<f64>()
        / reported.len() as f64;
    Ok(1.0 / (floor + mad))
}

/// Natural log of the potential, accurate where the potential underflows.
fn log_potential(params: PotentialParams, x: f64) -> f64 {
    let z = params.p * (x - params.c);
    if z < -30.0 {
        // ln(ln(1 + e^z)) = z + ln(1 - e^z/2 + ...) and the correction is
        // below double precision here
        z
    } else {
        crate::potential::potential(params, x).ln()
    }
}

fn softmax_of_logs(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for o in &mut out {
        *o /= total;
    }
    out
}

/// Scores divided by their population σ, mapped through the potential and
/// normalized. Zero spread gives equal fractions.
pub fn worker_reward_fractions(scores: &[f64], params: PotentialParams) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::Empty("worker scores"));
    }
    let logs: Vec<f64> = scale_by_std(scores)
        .into_iter()
        .map(|x| log_potential(params, x))
        .collect();
    Ok(softmax_of_logs(&logs))
}

/// `(score * stake)^{p_r}`, normalized.
pub fn reputer_reward_fractions(scores: &[f64], stakes: &[f64], p_r: f64) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::Empty("reputer scores"));
    }
    if stakes.len() != scores.len() {
        return Err(Error::LengthMismatch {
            what: "reputer stakes",
            expected: scores.len(),
            found: stakes.len(),
        });
    }
    if !(p_r.is_finite() && p_r > 0.0) {
        return Err(Error::param("p_r", p_r, "must be positive"));
    }
    let mut logs = Vec::with_capacity(scores.len());
    for (&s, &k) in scores.iter().zip(stakes) {
        if !(s > 0.0 && k > 0.0) {
            return Err(Error::param("reputer score or stake", s.min(k), "must be positive"));
        }
        logs.push(p_r * (s.ln() + k.ln()));
    }
    Ok(softmax_of_logs(&logs))
}

/// Shannon entropy `-Σ f ln f` of a fraction vector, with `0 ln 0 = 0`.
pub fn task_entropy(fractions: &[f64]) -> f64 {
    -fractions
        .iter()
        .filter(|&&f| f > 0.0)
        .map(|&f| f * f.ln())
        .sum::<f64>()
}

/// Budget share of each task, proportional to its entropy. All-zero entropy
/// splits equally.
pub fn task_reward_split(entropies: [f64; TASKS]) -> [f64; TASKS] {
    split_over(entropies, [true; TASKS])
}

fn split_over(entropies: [f64; TASKS], active: [bool; TASKS]) -> [f64; TASKS] {
    let total: f64 = entropies.iter().sum();
    let mut out = [0.0; TASKS];
    if total > 0.0 {
        for (o, h) in out.iter_mut().zip(entropies) {
            *o = h / total;
        }
    } else {
        let n = active.iter().filter(|a| **a).count().max(1) as f64;
        for (o, a) in out.iter_mut().zip(active) {
            if a {
                *o = 1.0 / n;
            }
        }
    }
    out
}

/// Population std of the three per-task mean rewards.
pub fn reward_spread(mean_rewards: [f64; TASKS]) -> f64 {
    population_std(&mean_rewards)
}

/// Scores of every participant in one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBoard {
    pub epoch: usize,
    pub inferers: Vec<f64>,
    pub forecasters: Vec<f64>,
    pub reputers: Vec<f64>,
}

/// Slopes of the three reward curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardSlopes {
    pub inference: f64,
    pub forecast: f64,
    pub reputation: f64,
}

/// How one epoch's budget was distributed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardAllocation {
    pub budget: f64,
    pub entropies: [f64; TASKS],
    pub task_shares: [f64; TASKS],
    pub inferers: Vec<f64>,
    pub forecasters: Vec<f64>,
    pub reputers: Vec<f64>,
}

impl RewardAllocation {
    /// Mean reward per participant of each task; zero for an empty task.
    pub fn mean_rewards(&self) -> [f64; TASKS] {
        let m = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        [m(&self.inferers), m(&self.forecasters), m(&self.reputers)]
    }

    pub fn reward_spread(&self) -> f64 {
        reward_spread(self.mean_rewards())
    }

    pub fn total(&self) -> f64 {
        self.inferers.iter().chain(&self.forecasters).chain(&self.reputers).sum()
    }
}

/// Splits `budget` across tasks by entropy and within each task by the
/// reward fractions. If every task has zero entropy the budget goes equally
/// to the tasks that have participants, so nothing is left undistributed.
pub fn allocate_rewards(
    scores: &ScoreBoard,
    stakes: &[f64],
    offset: f64,
    slopes: RewardSlopes,
    budget: f64,
) -> Result<RewardAllocation> {
    if scores.inferers.is_empty() || scores.reputers.is_empty() {
        return Err(Error::Empty("inferer or reputer scores"));
    }
    let fi = worker_reward_fractions(&scores.inferers, PotentialParams::new(slopes.inference, offset)?)?;
    let ff = if scores.forecasters.is_empty() {
        Vec::new()
    } else {
        worker_reward_fractions(&scores.forecasters, PotentialParams::new(slopes.forecast, offset)?)?
    };
    let fr = reputer_reward_fractions(&scores.reputers, stakes, slopes.reputation)?;

    let entropies = [task_entropy(&fi), task_entropy(&ff), task_entropy(&fr)];
    let active = [true, !ff.is_empty(), true];
    let task_shares = split_over(entropies, active);
    let pay = |fr: &[f64], share: f64| fr.iter().map(|f| f * share * budget).collect::<Vec<_>>();
    Ok(RewardAllocation {
        budget,
        entropies,
        task_shares,
        inferers: pay(&fi, task_shares[0]),
        forecasters: pay(&ff, task_shares[1]),
        reputers: pay(&fr, task_shares[2]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fiducial() -> PotentialParams {
        PotentialParams::new(3.0, 0.75).unwrap()
    }

    #[test]
    fn one_out_examples() {
        assert_eq!(one_out_score(-2.0, -1.5), 0.5);
        assert_eq!(one_out_score(-2.0, -2.5), -0.5);
    }

    #[test]
    fn consensus_examples() {
        let c = reputer_consensus(&[vec![1.0, 2.0], vec![3.0, 4.0]], &[1.0, 1.0]).unwrap();
        assert_eq!(c, vec![2.0, 3.0]);
        let c = reputer_consensus(&[vec![0.0], vec![4.0]], &[3.0, 1.0]).unwrap();
        assert_eq!(c, vec![1.0]);
        assert!(reputer_consensus(&[vec![0.0]], &[0.0]).is_err());
        assert!(reputer_consensus(&[vec![0.0], vec![1.0, 2.0]], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn reputer_score_examples() {
        let s = reputer_score(&[1.0, 2.0], &[1.0, 2.0], DEFAULT_SCORE_FLOOR).unwrap();
        assert_relative_eq!(s, 1000.0, max_relative = 1e-12);
        let s = reputer_score(&[1.1, 2.1], &[1.0, 2.0], DEFAULT_SCORE_FLOOR).unwrap();
        assert_relative_eq!(s, 1.0 / 0.101, max_relative = 1e-9);
    }

    #[test]
    fn worker_fractions_examples() {
        let f = worker_reward_fractions(&[-1.0, 1.0], fiducial()).unwrap();
        let a = (1.0 + (-5.25f64).exp()).ln();
        let b = (1.0 + 0.75f64.exp()).ln();
        assert_relative_eq!(f[0], a / (a + b), max_relative = 1e-12);
        assert_relative_eq!(f[1], b / (a + b), max_relative = 1e-12);
        assert!((f[0] - 0.0045826).abs() < 1e-7);
        let eq = worker_reward_fractions(&[0.4; 5], fiducial()).unwrap();
        for x in eq {
            assert_relative_eq!(x, 0.2, max_relative = 1e-12);
        }
    }

    #[test]
    fn worker_fractions_survive_underflow() {
        // tiny spread around a large negative mean drives every potential
        // below the smallest double
        let scores = [-5.0, -5.0 + 1e-3, -5.0 - 1e-3];
        let f = worker_reward_fractions(&scores, fiducial()).unwrap();
        assert!(f.iter().all(|x| x.is_finite()));
        assert_relative_eq!(f.iter().sum::<f64>(), 1.0, max_relative = 1e-12);
        assert!(f[1] > f[0] && f[0] > f[2]);
    }

    #[test]
    fn reputer_fraction_examples() {
        let f = reputer_reward_fractions(&[1.0, 1.0], &[1.0, 3.0], 1.0).unwrap();
        assert_relative_eq!(f[0], 0.25, max_relative = 1e-12);
        assert_relative_eq!(f[1], 0.75, max_relative = 1e-12);
        let f = reputer_reward_fractions(&[2.0, 1.0], &[1.0, 1.0], 2.0).unwrap();
        assert_relative_eq!(f[0], 0.8, max_relative = 1e-12);
        assert_relative_eq!(f[1], 0.2, max_relative = 1e-12);
        // huge stakes and scores do not overflow
        let f = reputer_reward_fractions(&[1e3, 1e3], &[1e300, 1e300], 1.5).unwrap();
        assert_relative_eq!(f[0], 0.5, max_relative = 1e-12);
    }

    #[test]
    fn entropy_examples() {
        assert_relative_eq!(task_entropy(&[0.25; 4]), 4f64.ln(), max_relative = 1e-12);
        assert_eq!(task_entropy(&[1.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn split_examples() {
        let s = task_reward_split([1.0, 1.0, 2.0]);
        assert_eq!(s, [0.25, 0.25, 0.5]);
        let s = task_reward_split([0.0; 3]);
        for x in s {
            assert_relative_eq!(x, 1.0 / 3.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn spread_examples() {
        assert!(reward_spread([0.1, 0.1, 0.1]) < 1e-16);
        assert_relative_eq!(reward_spread([0.0, 0.0, 0.3]), 0.02f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn allocation_without_forecasters() {
        let board = ScoreBoard {
            epoch: 0,
            inferers: vec![0.1, -0.2, 0.05],
            forecasters: vec![],
            reputers: vec![10.0, 12.0],
        };
        let slopes = RewardSlopes {
            inference: 3.0,
            forecast: 3.0,
            reputation: 1.0,
        };
        let a = allocate_rewards(&board, &[2e5, 3e5], 0.75, slopes, 1.0).unwrap();
        assert_eq!(a.task_shares[1], 0.0);
        assert_eq!(a.mean_rewards()[1], 0.0);
        assert_relative_eq!(a.total(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn allocation_single_participants() {
        let board = ScoreBoard {
            epoch: 0,
            inferers: vec![0.0],
            forecasters: vec![],
            reputers: vec![10.0],
        };
        let slopes = RewardSlopes {
            inference: 3.0,
            forecast: 3.0,
            reputation: 1.0,
        };
        let a = allocate_rewards(&board, &[2e5], 0.75, slopes, 1.0).unwrap();
        assert_eq!(a.task_shares, [0.5, 0.0, 0.5]);
        assert_relative_eq!(a.total(), 1.0, max_relative = 1e-12);
    }

    fn entropy_at(scores: &[f64], p: f64) -> f64 {
        task_entropy(&worker_reward_fractions(scores, PotentialParams::new(p, 0.75).unwrap()).unwrap())
    }

    proptest! {
        #[test]
        fn fractions_form_distribution(
            scores in proptest::collection::vec(-5.0f64..5.0, 1..30),
            p in 0.5f64..6.0,
        ) {
            let f = worker_reward_fractions(&scores, PotentialParams::new(p, 0.75).unwrap()).unwrap();
            prop_assert!(f.iter().all(|x| *x >= 0.0));
            prop_assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn split_is_a_distribution(h in proptest::array::uniform3(0.0f64..5.0)) {
            let s = task_reward_split(h);
            prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn steeper_slope_lowers_entropy(
            scores in proptest::collection::vec(-3.0f64..3.0, 2..20),
            p in 0.5f64..5.0,
            dp in 0.1f64..3.0,
        ) {
            prop_assume!(population_std(&scores) > 1e-6);
            prop_assert!(entropy_at(&scores, p + dp) <= entropy_at(&scores, p) + 1e-12);
        }

        #[test]
        fn allocation_conserves_budget(
            inf in proptest::collection::vec(-2.0f64..2.0, 1..10),
            fc in proptest::collection::vec(-2.0f64..2.0, 0..10),
            rep in proptest::collection::vec(1.0f64..1000.0, 1..10),
            budget in 0.1f64..10.0,
        ) {
            let stakes: Vec<f64> = (0..rep.len()).map(|m| 1.6e5 * (1.0 + m as f64)).collect();
            let board = ScoreBoard { epoch: 0, inferers: inf, forecasters: fc, reputers: rep };
            let slopes = RewardSlopes { inference: 3.0, forecast: 3.0, reputation: 1.0 };
            let a = allocate_rewards(&board, &stakes, 0.75, slopes, budget).unwrap();
            prop_assert!((a.total() - budget).abs() < 1e-9 * budget);
        }
    }
}
