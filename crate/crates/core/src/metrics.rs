//! Per-round observables and run-level accounting.
//!
//! Notation follows the protocol analysis: `r_t(u)` is the number of requests
//! server `u` receives in round `t`, `r_t(N(v))` its sum over the
//! neighbourhood of client `v`, `S_t(v)` the fraction of burned servers in
//! `N(v)`, and
//!
//! ```text
//! K_t(v) = (1 / (c·d·Δ_v)) · Σ_{i ≤ t} r_i(N(v))
//! ```
//!
//! with `Δ_v` the client's own degree (on regular graphs `Δ_v = Δ`). Since a
//! burned server has received more than `c·d` requests, `S_t(v) ≤ K_t(v)`.

use serde::{Deserialize, Serialize};

use crate::graph::BipartiteGraph;
use crate::protocol::ProtocolKind;

/// How much per-round state is tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricsLevel {
    /// `S_t`, `K_t` and `r_t` are tracked every round.
    #[default]
    Full,
    /// Only counts and work; the heavy columns are left empty.
    Light,
}

impl std::str::FromStr for MetricsLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Self::Full),
            "light" => Ok(Self::Light),
            other => Err(format!(
                "unknown metrics level `{other}` (expected full or light)"
            )),
        }
    }
}

/// Everything observed in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    /// `Σ_u r_t(u)`; equals the number of balls alive at the start of the round.
    pub requests_sent: u64,
    pub accepted: u64,
    pub alive_after: u64,
    pub burned_servers: u64,
    #[serde(rename = "S_t")]
    pub s_t: Option<f64>,
    #[serde(rename = "K_t")]
    pub k_t: Option<f64>,
    pub r_t_max: Option<u64>,
    pub messages: u64,
}

/// Terminal summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub kind: ProtocolKind,
    pub n: usize,
    pub c: u32,
    pub d: u32,
    pub seed: u64,
    pub max_rounds: u32,
    /// `None` when the run did not finish within `max_rounds`.
    pub completion_round: Option<u32>,
    pub work: u64,
    pub max_load: u64,
    pub total_balls: u64,
    pub trajectory: Vec<RoundRecord>,
}

impl RunResult {
    pub fn completed(&self) -> bool {
        self.completion_round.is_some()
    }

    /// Largest `S_t` over the trajectory, when tracked.
    pub fn max_s_t(&self) -> Option<f64> {
        max_opt(self.trajectory.iter().map(|r| r.s_t))
    }

    pub fn max_k_t(&self) -> Option<f64> {
        max_opt(self.trajectory.iter().map(|r| r.k_t))
    }

    /// Work per ball, `W / (n·d)`.
    pub fn work_per_ball(&self) -> f64 {
        self.work as f64 / (self.n as f64 * f64::from(self.d))
    }
}

fn max_opt(it: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut out: Option<f64> = None;
    for x in it {
        let x = x?;
        out = Some(out.map_or(x, |m| m.max(x)));
    }
    out
}

/// Per-client `r_t(N(v))` by scatter-adding each server's count into its
/// clients; also returns `r_t = max_v r_t(N(v))`.
pub fn neighborhood_request_sums(g: &BipartiteGraph, per_server: &[u32]) -> (Vec<u64>, u64) {
    let mut sums = vec![0u64; g.n_clients()];
    scatter_add(g, per_server, &mut sums);
    let max = sums.iter().copied().max().unwrap_or(0);
    (sums, max)
}

fn scatter_add(g: &BipartiteGraph, per_server: &[u32], sums: &mut [u64]) {
    debug_assert_eq!(per_server.len(), g.n_servers());
    for (u, &r) in per_server.iter().enumerate() {
        if r == 0 {
            continue;
        }
        for &v in g.server_neighbors(u) {
            sums[v as usize] += u64::from(r);
        }
    }
}

/// Per-client `S_t(v) = |burned ∩ N(v)| / Δ_v` and `S_t = max_v S_t(v)`.
pub fn burned_fraction(g: &BipartiteGraph, burned: &[bool]) -> (Vec<f64>, f64) {
    let per_client: Vec<f64> = (0..g.n_clients())
        .map(|v| {
            let nbrs = g.client_neighbors(v);
            let b = nbrs.iter().filter(|&&u| burned[u as usize]).count();
            b as f64 / nbrs.len() as f64
        })
        .collect();
    let max = per_client.iter().copied().fold(0.0, f64::max);
    (per_client, max)
}

/// Per-client `K_t(v)` from cumulative neighbourhood sums, and `K_t`.
pub fn k_statistic(g: &BipartiteGraph, c: u32, d: u32, cumulative: &[u64]) -> (Vec<f64>, f64) {
    let per_client: Vec<f64> = cumulative
        .iter()
        .enumerate()
        .map(|(v, &sum)| k_value(sum, c, d, g.client_degree(v)))
        .collect();
    let max = per_client.iter().copied().fold(0.0, f64::max);
    (per_client, max)
}

/// `sum / (c·d·Δ_v)`.
pub fn k_value(sum: u64, c: u32, d: u32, degree: usize) -> f64 {
    sum as f64 / (f64::from(c) * f64::from(d) * degree as f64)
}

/// `W = Σ_t messages_t`, two messages per request.
pub fn accumulate_work(trajectory: &[RoundRecord]) -> u64 {
    trajectory.iter().map(|r| 2 * r.requests_sent).sum()
}

/// Incremental per-client state maintained alongside a run.
#[derive(Debug, Clone)]
pub struct MetricsTracker {
    level: MetricsLevel,
    last_sums: Vec<u64>,
    cumulative: Vec<u64>,
    burned_neighbors: Vec<u32>,
}

/// Heavy observables of one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub s_t: f64,
    pub k_t: f64,
    pub r_t_max: u64,
}

impl MetricsTracker {
    pub fn new(g: &BipartiteGraph, level: MetricsLevel) -> Self {
        let n = match level {
            MetricsLevel::Full => g.n_clients(),
            MetricsLevel::Light => 0,
        };
        Self {
            level,
            last_sums: vec![0; n],
            cumulative: vec![0; n],
            burned_neighbors: vec![0; n],
        }
    }

    pub fn level(&self) -> MetricsLevel {
        self.level
    }

    /// Folds one round in. `per_server` holds this round's `r_t(u)`,
    /// `newly_burned` the servers that burned in this round.
    pub fn observe(
        &mut self,
        g: &BipartiteGraph,
        c: u32,
        d: u32,
        per_server: &[u32],
        newly_burned: &[u32],
    ) -> Option<Observables> {
        if self.level == MetricsLevel::Light {
            return None;
        }
        self.last_sums.iter_mut().for_each(|s| *s = 0);
        scatter_add(g, per_server, &mut self.last_sums);
        for (cum, &s) in self.cumulative.iter_mut().zip(&self.last_sums) {
            *cum += s;
        }
        for &u in newly_burned {
            for &v in g.server_neighbors(u as usize) {
                self.burned_neighbors[v as usize] += 1;
            }
        }
        let r_t_max = self.last_sums.iter().copied().max().unwrap_or(0);
        let mut s_t = 0.0f64;
        let mut k_t = 0.0f64;
        for v in 0..g.n_clients() {
            let deg = g.client_degree(v);
            s_t = s_t.max(f64::from(self.burned_neighbors[v]) / deg as f64);
            k_t = k_t.max(k_value(self.cumulative[v], c, d, deg));
        }
        Some(Observables { s_t, k_t, r_t_max })
    }

    /// `r_t(N(v))` of the most recent round (empty under light metrics).
    pub fn last_neighborhood_sums(&self) -> &[u64] {
        &self.last_sums
    }

    /// `Σ_{i ≤ t} r_i(N(v))` per client.
    pub fn cumulative_sums(&self) -> &[u64] {
        &self.cumulative
    }

    /// Burned servers in each client's neighbourhood.
    pub fn burned_neighbor_counts(&self) -> &[u32] {
        &self.burned_neighbors
    }

    pub fn k_values(&self, g: &BipartiteGraph, c: u32, d: u32) -> Vec<f64> {
        k_statistic(g, c, d, &self.cumulative).0
    }

    pub fn s_values(&self, g: &BipartiteGraph) -> Vec<f64> {
        self.burned_neighbors
            .iter()
            .enumerate()
            .map(|(v, &b)| f64::from(b) / g.client_degree(v) as f64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete(n: u32) -> BipartiteGraph {
        BipartiteGraph::from_edges(n as usize, (0..n).flat_map(|v| (0..n).map(move |u| (v, u))))
            .unwrap()
    }

    fn three_by_three() -> BipartiteGraph {
        BipartiteGraph::from_client_adj(3, vec![vec![0, 2], vec![1, 2], vec![0, 1, 2]]).unwrap()
    }

    fn record(round: u32, requests: u64) -> RoundRecord {
        RoundRecord {
            round,
            requests_sent: requests,
            accepted: 0,
            alive_after: 0,
            burned_servers: 0,
            s_t: None,
            k_t: None,
            r_t_max: None,
            messages: 2 * requests,
        }
    }

    #[test]
    fn neighborhood_sums_zero() {
        let (sums, max) = neighborhood_request_sums(&complete(3), &[0, 0, 0]);
        assert_eq!(sums, vec![0, 0, 0]);
        assert_eq!(max, 0);
    }

    #[test]
    fn neighborhood_sums_complete() {
        let (sums, max) = neighborhood_request_sums(&complete(2), &[2, 0]);
        assert_eq!(sums, vec![2, 2]);
        assert_eq!(max, 2);
    }

    #[test]
    fn neighborhood_sums_hand_built() {
        // client 0 has N(v) = {0, 2}: 1 + 3
        let (sums, max) = neighborhood_request_sums(&three_by_three(), &[1, 2, 3]);
        assert_eq!(sums, vec![4, 5, 6]);
        assert_eq!(max, 6);
    }

    #[test]
    fn burned_fraction_extremes() {
        let g = complete(3);
        assert_eq!(burned_fraction(&g, &[false; 3]), (vec![0.0; 3], 0.0));
        assert_eq!(burned_fraction(&g, &[true; 3]), (vec![1.0; 3], 1.0));
    }

    #[test]
    fn burned_fraction_quarter() {
        let g = complete(4);
        let (s, max) = burned_fraction(&g, &[false, true, false, false]);
        assert_eq!(s[0], 0.25);
        assert_eq!(max, 0.25);
    }

    #[test]
    fn k_statistic_examples() {
        let g = complete(4);
        assert_eq!(k_statistic(&g, 2, 1, &[0; 4]).1, 0.0);
        // 8 / (2·1·4)
        let (k, max) = k_statistic(&g, 2, 1, &[8, 0, 0, 0]);
        assert_eq!(k[0], 1.0);
        assert_eq!(max, 1.0);
    }

    #[test]
    fn k_statistic_uses_own_degree() {
        let g = three_by_three();
        let (k, _) = k_statistic(&g, 1, 1, &[6, 6, 6]);
        assert_eq!(k, vec![3.0, 3.0, 2.0]);
    }

    #[test]
    fn work_examples() {
        assert_eq!(accumulate_work(&[]), 0);
        assert_eq!(accumulate_work(&[record(1, 4), record(2, 1)]), 10);
        // n=3, d=2, everything accepted in round 1
        assert_eq!(accumulate_work(&[record(1, 6)]), 2 * 2 * 3);
    }

    #[test]
    fn tracker_matches_pure_functions() {
        let g = three_by_three();
        let mut t = MetricsTracker::new(&g, MetricsLevel::Full);
        let o1 = t.observe(&g, 1, 1, &[1, 2, 3], &[2]).unwrap();
        assert_eq!(t.last_neighborhood_sums(), &[4, 5, 6]);
        assert_eq!(o1.r_t_max, 6);
        let o2 = t.observe(&g, 1, 1, &[0, 1, 0], &[]).unwrap();
        assert_eq!(t.cumulative_sums(), &[4, 6, 7]);
        assert_eq!(o2.r_t_max, 1);
        let (k, kmax) = k_statistic(&g, 1, 1, &[4, 6, 7]);
        assert_eq!(t.k_values(&g, 1, 1), k);
        assert_eq!(o2.k_t, kmax);
        let (s, smax) = burned_fraction(&g, &[false, false, true]);
        assert_eq!(t.s_values(&g), s);
        assert_eq!(o2.s_t, smax);
    }

    #[test]
    fn light_tracker_is_inert() {
        let g = three_by_three();
        let mut t = MetricsTracker::new(&g, MetricsLevel::Light);
        assert!(t.observe(&g, 1, 1, &[1, 2, 3], &[2]).is_none());
        assert!(t.cumulative_sums().is_empty());
    }

    #[test]
    fn metrics_level_parses() {
        assert_eq!("full".parse::<MetricsLevel>().unwrap(), MetricsLevel::Full);
        assert_eq!(
            "LIGHT".parse::<MetricsLevel>().unwrap(),
            MetricsLevel::Light
        );
        assert!("heavy".parse::<MetricsLevel>().is_err());
    }
}
