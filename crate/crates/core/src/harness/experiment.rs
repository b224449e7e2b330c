//! Repeated trials on one graph.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CSetting, ExperimentConfig, GraphSpec, QuotaPolicy};
use super::summary::{AggregateSummary, SummaryAccumulator, TrialStats};
use super::{HarnessError, Result};
use crate::graph::{BipartiteGraph, DegreeReport};
use crate::metrics::{MetricsLevel, RunResult};
use crate::protocol::{default_max_rounds, ProtocolKind, SimState};
use crate::rng::trial_seed;
use crate::theory::{self, TheoryEnvelope, TheoryParams};

/// A configuration with every default filled in against a concrete graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub graph: GraphSpec,
    pub kind: ProtocolKind,
    pub n: usize,
    pub c: u32,
    pub c_setting: CSetting,
    pub d: u32,
    pub quotas: QuotaPolicy,
    pub trials: u32,
    pub base_seed: u64,
    pub max_rounds: u32,
    pub metrics: MetricsLevel,
    pub eta: f64,
    pub rho: f64,
    pub degrees: DegreeReport,
}

impl Resolved {
    pub fn new(cfg: &ExperimentConfig, g: &BipartiteGraph) -> Result<Self> {
        cfg.validate()?;
        let degrees = g.degree_report();
        let n = g.n();
        if n < 2 {
            return Err(HarnessError::Config(format!(
                "graph needs at least 2 vertices per side (n={n})"
            )));
        }
        let ln_n = (n as f64).ln();
        let eta = cfg
            .eta
            .unwrap_or(degrees.delta_min_c as f64 / (ln_n * ln_n));
        let rho = cfg.rho.unwrap_or(degrees.ratio.max(1.0));
        let c = match cfg.c {
            CSetting::Fixed(c) => c,
            CSetting::Auto => theory::recommended_c(eta, rho, cfg.d),
        };
        Ok(Self {
            graph: cfg.graph.clone(),
            kind: cfg.kind,
            n,
            c,
            c_setting: cfg.c,
            d: cfg.d,
            quotas: cfg.quotas,
            trials: cfg.trials,
            base_seed: cfg.base_seed,
            max_rounds: cfg.max_rounds.unwrap_or_else(|| default_max_rounds(n)),
            metrics: cfg.metrics,
            eta,
            rho,
            degrees,
        })
    }

    pub fn theory_params(&self) -> Result<TheoryParams> {
        Ok(TheoryParams::new(
            self.n,
            self.d,
            self.c,
            self.eta,
            self.rho,
            self.degrees.delta_min_c,
            self.degrees.delta_max_s,
        )?)
    }

    /// The `K_t` envelope, or `None` when `c` is too small for it to exist.
    pub fn envelope(&self) -> Option<TheoryEnvelope> {
        self.theory_params()
            .ok()
            .and_then(|p| theory::envelope(&p).ok())
    }

    pub fn seed_of(&self, trial: u64) -> u64 {
        trial_seed(self.base_seed, trial)
    }
}

pub fn run_trial(g: &BipartiteGraph, r: &Resolved, trial: u64) -> Result<RunResult> {
    let seed = r.seed_of(trial);
    let quotas = r.quotas.quotas(g.n_clients(), r.d, seed);
    let mut sim = SimState::new(g, r.kind, r.c, r.d, quotas.as_deref(), seed, r.metrics)?;
    Ok(sim.run_to_completion(r.max_rounds)?)
}

pub struct ExperimentOutput {
    pub resolved: Resolved,
    pub envelope: Option<TheoryEnvelope>,
    /// Ordered by trial index.
    pub runs: Vec<RunResult>,
    pub stats: SummaryAccumulator,
    pub summary: AggregateSummary,
}

/// Runs every trial in parallel; the result does not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, g: &BipartiteGraph) -> Result<ExperimentOutput> {
    let resolved = Resolved::new(cfg, g)?;
    let envelope = resolved.envelope();
    let runs: Vec<RunResult> = (0..u64::from(resolved.trials))
        .into_par_iter()
        .map(|i| run_trial(g, &resolved, i))
        .collect::<Result<_>>()?;
    let stats: SummaryAccumulator = runs
        .iter()
        .enumerate()
        .map(|(i, run)| TrialStats::from_run(i as u64, run, envelope.as_ref()))
        .collect();
    let summary = stats.finish();
    Ok(ExperimentOutput {
        resolved,
        envelope,
        runs,
        stats,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_regular;

    fn cfg(trials: u32) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(GraphSpec::Regular {
            n: 64,
            delta: 16,
            seed: 1,
        });
        cfg.trials = trials;
        cfg.base_seed = 77;
        cfg
    }

    #[test]
    fn auto_c_and_defaults() {
        let g = generate_regular(64, 16, 1).unwrap();
        let r = Resolved::new(&cfg(1), &g).unwrap();
        let ln = (64f64).ln();
        assert!((r.eta - 16.0 / (ln * ln)).abs() < 1e-12);
        assert_eq!(r.rho, 1.0);
        assert_eq!(r.c, theory::recommended_c(r.eta, 1.0, 1));
        assert_eq!(r.max_rounds, default_max_rounds(64));
    }

    #[test]
    fn trials_are_ordered_and_reproducible() {
        let g = generate_regular(64, 16, 1).unwrap();
        let a = run_experiment(&cfg(12), &g).unwrap();
        let b = run_experiment(&cfg(12), &g).unwrap();
        assert_eq!(a.runs, b.runs);
        for (i, run) in a.runs.iter().enumerate() {
            assert_eq!(run.seed, 77 + i as u64);
            assert_eq!(run, &run_trial(&g, &a.resolved, i as u64).unwrap());
        }
        assert_eq!(a.summary.trials, 12);
    }
}
