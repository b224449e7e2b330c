use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{BipartiteGraph, GraphError};
use crate::rng::graph_rng;

/// Restarts allowed per matching (regular) or per pairing (almost-regular).
pub const RETRY_BUDGET: usize = 1000;

/// Dense bitset rows up to this many vertices per side, hash set above.
const DENSE_LIMIT: usize = 1 << 14;

/// Edge membership used while building a graph.
enum EdgeSet {
    Dense { row_words: usize, words: Vec<u64> },
    Sparse(HashSet<u64>),
}

impl EdgeSet {
    fn new(n: usize) -> Self {
        if n <= DENSE_LIMIT {
            let words_per_row = n.div_ceil(64);
            EdgeSet::Dense {
                row_words: words_per_row,
                words: vec![0; words_per_row * n],
            }
        } else {
            EdgeSet::Sparse(HashSet::new())
        }
    }

    fn contains(&self, v: u32, u: u32) -> bool {
        match self {
            EdgeSet::Dense { row_words, words } => {
                let w = words[v as usize * row_words + (u as usize >> 6)];
                w >> (u & 63) & 1 == 1
            }
            EdgeSet::Sparse(set) => set.contains(&key(v, u)),
        }
    }

    fn insert(&mut self, v: u32, u: u32) {
        match self {
            EdgeSet::Dense { row_words, words } => {
                words[v as usize * *row_words + (u as usize >> 6)] |= 1 << (u & 63)
            }
            EdgeSet::Sparse(set) => {
                set.insert(key(v, u));
            }
        }
    }

    fn remove(&mut self, v: u32, u: u32) {
        match self {
            EdgeSet::Dense { row_words, words } => {
                words[v as usize * *row_words + (u as usize >> 6)] &= !(1 << (u & 63))
            }
            EdgeSet::Sparse(set) => {
                set.remove(&key(v, u));
            }
        }
    }
}

fn key(v: u32, u: u32) -> u64 {
    (u64::from(v) << 32) | u64::from(u)
}

/// Random `delta`-regular bipartite graph on `n + n` vertices.
///
/// The graph is the union of `delta` random perfect matchings. A fresh
/// uniform permutation that would create a parallel edge is repaired by
/// transpositions with other positions that are valid for both sides; the
/// matching is redrawn from scratch if repair stalls. For `delta > n/2` the
/// complement of an `(n - delta)`-regular graph is returned instead.
pub fn generate_regular(n: usize, delta: usize, seed: u64) -> Result<BipartiteGraph, GraphError> {
    if n == 0 || delta == 0 {
        return Err(GraphError::Infeasible(format!(
            "need n ≥ 1 and delta ≥ 1 (got n={n}, delta={delta})"
        )));
    }
    if delta > n {
        return Err(GraphError::Infeasible(format!(
            "delta={delta} exceeds n={n}"
        )));
    }
    if n > u32::MAX as usize {
        return Err(GraphError::Infeasible(format!("n={n} too large")));
    }
    let mut rng = graph_rng(seed);
    let complement = 2 * delta > n;
    let k = if complement { n - delta } else { delta };
    let mut edges = EdgeSet::new(n);
    let mut adj: Vec<Vec<u32>> = vec![Vec::with_capacity(k); n];
    for _ in 0..k {
        let perm = draw_matching(n, &edges, &mut rng)?;
        for (v, &u) in perm.iter().enumerate() {
            edges.insert(v as u32, u);
            adj[v].push(u);
        }
    }
    if complement {
        adj = (0..n as u32)
            .map(|v| (0..n as u32).filter(|&u| !edges.contains(v, u)).collect())
            .collect();
    }
    BipartiteGraph::from_client_adj(n, adj)
}

fn draw_matching(n: usize, edges: &EdgeSet, rng: &mut ChaCha8Rng) -> Result<Vec<u32>, GraphError> {
    let mut perm: Vec<u32> = (0..n as u32).collect();
    'attempt: for _ in 0..RETRY_BUDGET {
        perm.shuffle(rng);
        let conflicts: Vec<usize> = (0..n)
            .filter(|&v| edges.contains(v as u32, perm[v]))
            .collect();
        for v in conflicts {
            if !edges.contains(v as u32, perm[v]) {
                // fixed as a side effect of an earlier swap
                continue;
            }
            if !repair_position(v, &mut perm, edges, rng) {
                continue 'attempt;
            }
        }
        return Ok(perm);
    }
    Err(GraphError::RetryBudgetExhausted(RETRY_BUDGET))
}

fn repair_position(v: usize, perm: &mut [u32], edges: &EdgeSet, rng: &mut ChaCha8Rng) -> bool {
    let n = perm.len();
    let budget = 64 * n.max(16);
    for _ in 0..budget {
        let w = rng.random_range(0..n);
        if w != v && !edges.contains(v as u32, perm[w]) && !edges.contains(w as u32, perm[v]) {
            perm.swap(v, w);
            return true;
        }
    }
    false
}

/// Random bipartite graph with `Δmin(C) ≥ delta_min_c` and
/// `Δmax(S) ≤ ⌊rho · delta_min_c⌋`.
///
/// Degree profile: a `heavy_fraction` of the clients and the same number of
/// servers get the cap degree `⌊rho · delta_min_c⌋`; every other client has
/// degree `delta_min_c`, and the remaining server stubs are spread evenly
/// over the other servers. Stubs are paired uniformly at random and parallel
/// edges are removed by stub swaps.
pub fn generate_almost_regular(
    n: usize,
    delta_min_c: usize,
    rho: f64,
    heavy_fraction: f64,
    seed: u64,
) -> Result<BipartiteGraph, GraphError> {
    if n == 0 || delta_min_c == 0 {
        return Err(GraphError::Infeasible(format!(
            "need n ≥ 1 and delta_min_c ≥ 1 (got n={n}, delta_min_c={delta_min_c})"
        )));
    }
    if delta_min_c > n {
        return Err(GraphError::Infeasible(format!(
            "delta_min_c={delta_min_c} exceeds n={n}"
        )));
    }
    if !(rho >= 1.0) || !rho.is_finite() {
        return Err(GraphError::Infeasible(format!(
            "rho must be ≥ 1 (got {rho})"
        )));
    }
    if !(0.0..=0.1).contains(&heavy_fraction) {
        return Err(GraphError::Infeasible(format!(
            "heavy_fraction must lie in [0, 0.1] (got {heavy_fraction})"
        )));
    }
    let cap = ((rho * delta_min_c as f64).floor() as usize)
        .min(n)
        .max(delta_min_c);
    let heavy = (heavy_fraction * n as f64).floor() as usize;

    let mut rng = graph_rng(seed);

    let mut client_deg = vec![delta_min_c; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    for &v in &order[..heavy] {
        client_deg[v] = cap;
    }
    let total: usize = client_deg.iter().sum();

    let mut server_deg = vec![0usize; n];
    order.shuffle(&mut rng);
    let (heavy_servers, light_servers) = order.split_at(heavy);
    for &u in heavy_servers {
        server_deg[u] = cap;
    }
    let rest = total - heavy * cap;
    if !light_servers.is_empty() {
        let base = rest / light_servers.len();
        let extra = rest % light_servers.len();
        if base == 0 || base + usize::from(extra > 0) > cap {
            return Err(GraphError::Infeasible(format!(
                "server degrees cannot absorb {rest} stubs within [1, {cap}]"
            )));
        }
        for (i, &u) in light_servers.iter().enumerate() {
            server_deg[u] = base + usize::from(i < extra);
        }
    } else if rest != 0 {
        return Err(GraphError::Infeasible("degree sums do not match".into()));
    }

    let adj = pair_stubs(&client_deg, &server_deg, &mut rng)?;
    let g = BipartiteGraph::from_client_adj(n, adj)?;
    let report = g.degree_report();
    if report.delta_min_c < delta_min_c || report.delta_max_s > cap {
        return Err(GraphError::Infeasible(format!(
            "realized degrees violate bounds: {report:?}"
        )));
    }
    Ok(g)
}

/// Configuration-model pairing of client and server stubs, with parallel
/// edges removed by swapping server endpoints between stubs.
fn pair_stubs(
    client_deg: &[usize],
    server_deg: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<u32>>, GraphError> {
    let n = client_deg.len();
    if client_deg.iter().any(|&d| d > n) || server_deg.iter().any(|&d| d > n) {
        return Err(GraphError::Infeasible("a degree exceeds n".into()));
    }
    let stub_client: Vec<u32> = client_deg
        .iter()
        .enumerate()
        .flat_map(|(v, &d)| std::iter::repeat_n(v as u32, d))
        .collect();
    let base_servers: Vec<u32> = server_deg
        .iter()
        .enumerate()
        .flat_map(|(u, &d)| std::iter::repeat_n(u as u32, d))
        .collect();
    let m = stub_client.len();
    if base_servers.len() != m {
        return Err(GraphError::Infeasible(format!(
            "client stubs ({m}) and server stubs ({}) differ",
            base_servers.len()
        )));
    }

    'attempt: for _ in 0..RETRY_BUDGET {
        let mut stub_server = base_servers.clone();
        stub_server.shuffle(rng);
        let mut edges = EdgeSet::new(n);
        let mut conflicts = Vec::new();
        let mut pending = vec![false; m];
        for k in 0..m {
            let (v, u) = (stub_client[k], stub_server[k]);
            if edges.contains(v, u) {
                conflicts.push(k);
                pending[k] = true;
            } else {
                edges.insert(v, u);
            }
        }
        for k in conflicts {
            let budget = 64 * m.max(16);
            let mut fixed = false;
            for _ in 0..budget {
                let j = rng.random_range(0..m);
                let (v, u) = (stub_client[k], stub_server[k]);
                let (vj, uj) = (stub_client[j], stub_server[j]);
                if j == k || pending[j] || v == vj {
                    continue;
                }
                if edges.contains(v, uj) || edges.contains(vj, u) {
                    continue;
                }
                edges.remove(vj, uj);
                edges.insert(v, uj);
                edges.insert(vj, u);
                stub_server.swap(k, j);
                pending[k] = false;
                fixed = true;
                break;
            }
            if !fixed {
                continue 'attempt;
            }
        }
        let mut adj: Vec<Vec<u32>> = client_deg.iter().map(|&d| Vec::with_capacity(d)).collect();
        for k in 0..m {
            adj[stub_client[k] as usize].push(stub_server[k]);
        }
        return Ok(adj);
    }
    Err(GraphError::RetryBudgetExhausted(RETRY_BUDGET))
}
