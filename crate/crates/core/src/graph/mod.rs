//! Client–server bipartite graphs.
//!
//! Clients and servers are both indexed `0..n`. Adjacency is stored in both
//! directions and kept sorted, so a graph has a single canonical form: two
//! graphs with the same edge set compare equal and serialize to the same
//! bytes.

mod generate;
mod io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{generate_almost_regular, generate_regular, RETRY_BUDGET};
pub use io::{load_graph, parse_graph, save_graph, to_edge_list_string, ParseError};

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("generation retry budget exhausted after {0} attempts")]
    RetryBudgetExhausted(usize),
    #[error("sides must have equal size (got {clients} clients, {servers} servers)")]
    UnequalSides { clients: usize, servers: usize },
    #[error("client {client}: server index {server} out of range")]
    IndexOutOfRange { client: usize, server: usize },
    #[error("duplicate edge ({client}, {server})")]
    DuplicateEdge { client: usize, server: usize },
    #[error("client {0} has no neighbours")]
    IsolatedClient(usize),
    #[error("graph has no clients")]
    Empty,
}

/// Fixed client–server topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    client_adj: Vec<Vec<u32>>,
    server_adj: Vec<Vec<u32>>,
}

impl BipartiteGraph {
    /// Builds a graph from per-client neighbour lists over `n_servers`
    /// servers. Lists are sorted; duplicates, out-of-range indices, unequal
    /// sides and clients without neighbours are rejected.
    pub fn from_client_adj(
        n_servers: usize,
        mut client_adj: Vec<Vec<u32>>,
    ) -> Result<Self, GraphError> {
        let n_clients = client_adj.len();
        if n_clients == 0 {
            return Err(GraphError::Empty);
        }
        if n_clients != n_servers {
            return Err(GraphError::UnequalSides {
                clients: n_clients,
                servers: n_servers,
            });
        }
        let mut server_adj = vec![Vec::new(); n_servers];
        for (v, nbrs) in client_adj.iter_mut().enumerate() {
            if nbrs.is_empty() {
                return Err(GraphError::IsolatedClient(v));
            }
            nbrs.sort_unstable();
            for w in nbrs.windows(2) {
                if w[0] == w[1] {
                    return Err(GraphError::DuplicateEdge {
                        client: v,
                        server: w[0] as usize,
                    });
                }
            }
            for &u in nbrs.iter() {
                let Some(list) = server_adj.get_mut(u as usize) else {
                    return Err(GraphError::IndexOutOfRange {
                        client: v,
                        server: u as usize,
                    });
                };
                // clients are visited in ascending order, so server lists
                // come out sorted
                list.push(v as u32);
            }
        }
        Ok(Self {
            client_adj,
            server_adj,
        })
    }

    /// Builds a graph from an edge list of `(client, server)` pairs.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self, GraphError> {
        let mut adj = vec![Vec::new(); n];
        for (v, u) in edges {
            let Some(list) = adj.get_mut(v as usize) else {
                return Err(GraphError::IndexOutOfRange {
                    client: v as usize,
                    server: u as usize,
                });
            };
            list.push(u);
        }
        Self::from_client_adj(n, adj)
    }

    /// Number of clients, equal to the number of servers.
    pub fn n(&self) -> usize {
        self.client_adj.len()
    }

    pub fn n_clients(&self) -> usize {
        self.client_adj.len()
    }

    pub fn n_servers(&self) -> usize {
        self.server_adj.len()
    }

    /// Servers adjacent to client `v`, ascending.
    pub fn client_neighbors(&self, v: usize) -> &[u32] {
        &self.client_adj[v]
    }

    /// Clients adjacent to server `u`, ascending.
    pub fn server_neighbors(&self, u: usize) -> &[u32] {
        &self.server_adj[u]
    }

    pub fn client_degree(&self, v: usize) -> usize {
        self.client_adj[v].len()
    }

    pub fn server_degree(&self, u: usize) -> usize {
        self.server_adj[u].len()
    }

    pub fn edge_count(&self) -> usize {
        self.client_adj.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, client: usize, server: u32) -> bool {
        self.client_adj[client].binary_search(&server).is_ok()
    }

    /// All edges as `(client, server)` in canonical (sorted) order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.client_adj
            .iter()
            .enumerate()
            .flat_map(|(v, nbrs)| nbrs.iter().map(move |&u| (v as u32, u)))
    }

    pub fn degree_report(&self) -> DegreeReport {
        degree_report(self)
    }

    /// Full scan of `u ∈ N(v) ⇔ v ∈ N(u)`.
    pub fn is_symmetric(&self) -> bool {
        let forward = self.client_adj.iter().enumerate().all(|(v, nbrs)| {
            nbrs.iter().all(|&u| {
                self.server_adj[u as usize]
                    .binary_search(&(v as u32))
                    .is_ok()
            })
        });
        let backward = self.server_adj.iter().enumerate().all(|(u, nbrs)| {
            nbrs.iter().all(|&v| {
                self.client_adj[v as usize]
                    .binary_search(&(u as u32))
                    .is_ok()
            })
        });
        forward && backward
    }
}

/// Extreme degrees on both sides and `Δmax(S)/Δmin(C)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub delta_min_c: usize,
    pub delta_max_c: usize,
    pub delta_min_s: usize,
    pub delta_max_s: usize,
    pub ratio: f64,
}

pub fn degree_report(g: &BipartiteGraph) -> DegreeReport {
    let (delta_min_c, delta_max_c) = min_max((0..g.n_clients()).map(|v| g.client_degree(v)));
    let (delta_min_s, delta_max_s) = min_max((0..g.n_servers()).map(|u| g.server_degree(u)));
    DegreeReport {
        delta_min_c,
        delta_max_c,
        delta_min_s,
        delta_max_s,
        ratio: delta_max_s as f64 / delta_min_c as f64,
    }
}

fn min_max(it: impl Iterator<Item = usize>) -> (usize, usize) {
    it.fold((usize::MAX, 0), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

/// Outcome of checking the degree hypotheses of the main theorem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreconditionReport {
    pub eta: f64,
    pub rho: f64,
    /// `η·(ln n)²`
    pub min_degree_bound: f64,
    pub delta_min_c: usize,
    pub min_degree_ok: bool,
    pub ratio: f64,
    pub ratio_ok: bool,
}

impl PreconditionReport {
    pub fn passed(&self) -> bool {
        self.min_degree_ok && self.ratio_ok
    }
}

/// Checks `Δmin(C) ≥ η (ln n)²` and `Δmax(S)/Δmin(C) ≤ ρ`.
pub fn check_theorem_preconditions(g: &BipartiteGraph, eta: f64, rho: f64) -> PreconditionReport {
    let report = g.degree_report();
    let ln_n = (g.n() as f64).ln();
    let min_degree_bound = eta * ln_n * ln_n;
    PreconditionReport {
        eta,
        rho,
        min_degree_bound,
        delta_min_c: report.delta_min_c,
        min_degree_ok: report.delta_min_c as f64 >= min_degree_bound,
        ratio: report.ratio,
        ratio_ok: report.ratio <= rho,
    }
}
