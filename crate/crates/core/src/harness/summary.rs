//! Per-trial statistics and their aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::metrics::RunResult;
use crate::theory::{EnvelopeBound, TheoryEnvelope};

/// One row of `trials.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub trial: u64,
    pub seed: u64,
    /// `-1` when the run did not terminate.
    pub completion_round: i64,
    pub rounds: u32,
    pub work: u64,
    pub work_per_ball: f64,
    pub max_load: u64,
    #[serde(rename = "max_S_t")]
    pub max_s_t: Option<f64>,
    pub gamma_violations: Option<u32>,
    pub delta_violations: Option<u32>,
}

impl TrialStats {
    pub fn from_run(trial: u64, run: &RunResult, env: Option<&TheoryEnvelope>) -> Self {
        let (gamma_violations, delta_violations) = match env {
            Some(env) => match envelope_violations(run, env) {
                Some((g, d)) => (Some(g), Some(d)),
                None => (None, None),
            },
            None => (None, None),
        };
        Self {
            trial,
            seed: run.seed,
            completion_round: run.completion_round.map_or(-1, i64::from),
            rounds: run.trajectory.len() as u32,
            work: run.work,
            work_per_ball: run.work_per_ball(),
            max_load: run.max_load,
            max_s_t: run.max_s_t(),
            gamma_violations,
            delta_violations,
        }
    }

    pub fn completed(&self) -> bool {
        self.completion_round >= 0
    }

    pub fn violated_envelope(&self) -> bool {
        self.gamma_violations.unwrap_or(0) + self.delta_violations.unwrap_or(0) > 0
    }
}

/// Counts rounds whose `K_t` exceeds the applicable bound, split into the
/// `γ` phase and the `δ` phase. `None` when `K_t` was not tracked.
pub fn envelope_violations(run: &RunResult, env: &TheoryEnvelope) -> Option<(u32, u32)> {
    let rows = run.trajectory.iter().map(|r| (r.round, r.k_t));
    count_violations(rows, env)
}

pub fn count_violations(
    rows: impl Iterator<Item = (u32, Option<f64>)>,
    env: &TheoryEnvelope,
) -> Option<(u32, u32)> {
    let (mut gamma, mut delta) = (0, 0);
    for (t, k) in rows {
        let k = k?;
        match env.bound_at(t) {
            Some(EnvelopeBound::Gamma(b)) if k > b => gamma += 1,
            Some(EnvelopeBound::Delta(b)) if k > b => delta += 1,
            _ => {}
        }
    }
    Some((gamma, delta))
}

/// Mean, median, 95th percentile (nearest rank) and maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        };
        Some(Self {
            mean: v.iter().sum::<f64>() / n as f64,
            median,
            p95: v[nearest_rank(n, 0.95) - 1],
            max: v[n - 1],
        })
    }
}

/// 1-based nearest-rank index `⌈p·n⌉`.
pub fn nearest_rank(n: usize, p: f64) -> usize {
    ((p * n as f64).ceil() as usize).clamp(1, n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub trials: u64,
    pub completed: u64,
    pub non_termination_count: u64,
    /// Statistics below are over completed trials.
    pub completion_round: Option<Stat>,
    pub work: Option<Stat>,
    pub work_per_ball: Option<Stat>,
    pub max_load: Option<Stat>,
    #[serde(rename = "max_S_t")]
    pub max_s_t: Option<Stat>,
    pub envelope_violation_trials: Option<u64>,
    pub gamma_violation_rounds: Option<u64>,
    pub delta_violation_rounds: Option<u64>,
}

/// Trial statistics keyed by trial index, so merging partial results is
/// order independent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SummaryAccumulator {
    trials: BTreeMap<u64, TrialStats>,
}

impl SummaryAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, stats: TrialStats) {
        self.trials.insert(stats.trial, stats);
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.trials.extend(other.trials);
        self
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn trials(&self) -> impl Iterator<Item = &TrialStats> {
        self.trials.values()
    }

    pub fn finish(&self) -> AggregateSummary {
        let done: Vec<&TrialStats> = self.trials().filter(|t| t.completed()).collect();
        let stat = |f: &dyn Fn(&TrialStats) -> Option<f64>| {
            let xs: Vec<f64> = done.iter().filter_map(|t| f(t)).collect();
            Stat::of(&xs)
        };
        let tracked: Vec<&TrialStats> = self
            .trials()
            .filter(|t| t.gamma_violations.is_some())
            .collect();
        let (env_trials, gamma_rounds, delta_rounds) = if tracked.is_empty() {
            (None, None, None)
        } else {
            (
                Some(tracked.iter().filter(|t| t.violated_envelope()).count() as u64),
                Some(
                    tracked
                        .iter()
                        .map(|t| u64::from(t.gamma_violations.unwrap()))
                        .sum(),
                ),
                Some(
                    tracked
                        .iter()
                        .map(|t| u64::from(t.delta_violations.unwrap()))
                        .sum(),
                ),
            )
        };
        AggregateSummary {
            trials: self.trials.len() as u64,
            completed: done.len() as u64,
            non_termination_count: (self.trials.len() - done.len()) as u64,
            completion_round: stat(&|t| Some(t.completion_round as f64)),
            work: stat(&|t| Some(t.work as f64)),
            work_per_ball: stat(&|t| Some(t.work_per_ball)),
            max_load: stat(&|t| Some(t.max_load as f64)),
            max_s_t: stat(&|t| t.max_s_t),
            envelope_violation_trials: env_trials,
            gamma_violation_rounds: gamma_rounds,
            delta_violation_rounds: delta_rounds,
        }
    }
}

impl FromIterator<TrialStats> for SummaryAccumulator {
    fn from_iter<I: IntoIterator<Item = TrialStats>>(iter: I) -> Self {
        let mut acc = Self::new();
        for t in iter {
            acc.push(t);
        }
        acc
    }
}
