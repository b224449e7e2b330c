//! SAER and RAES round execution.
//!
//! Each round has two phases. In Phase 1 every client sends one request per
//! alive ball to a neighbour drawn uniformly at random with replacement. In
//! Phase 2 every server answers its whole batch with a single accept or
//! reject:
//!
//! - SAER: a server adds the batch to its cumulative received count. If it
//!   was burned already, or the count now exceeds `c·d`, it rejects the batch
//!   (and is burned from then on). Otherwise it accepts everything.
//! - RAES: a server rejects the batch if accepting would push its accepted
//!   load past `c·d`, and accepts it otherwise. It never burns.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::BipartiteGraph;
use crate::metrics::{MetricsLevel, MetricsTracker, RoundRecord, RunResult};
use crate::rng::round_client_stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProtocolKind {
    #[serde(rename = "SAER")]
    Saer,
    #[serde(rename = "RAES")]
    Raes,
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolKind::Saer => "SAER",
            ProtocolKind::Raes => "RAES",
        })
    }
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "SAER" => Ok(Self::Saer),
            "RAES" => Ok(Self::Raes),
            other => Err(format!(
                "unknown protocol `{other}` (expected SAER or RAES)"
            )),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("c and d must be at least 1 (got c={c}, d={d})")]
    BadParameters { c: u32, d: u32 },
    #[error("quota {quota} of client {client} exceeds d={d}")]
    QuotaExceedsD { client: usize, quota: u32, d: u32 },
    #[error("expected {expected} quotas, got {got}")]
    QuotaLength { expected: usize, got: usize },
    #[error("graph is empty")]
    EmptyGraph,
    #[error("run is already complete")]
    AlreadyComplete,
    #[error("request batch was drawn for round {batch}, state expects round {expected}")]
    StaleBatch { batch: u32, expected: u32 },
    #[error("max_rounds must be at least 1")]
    ZeroMaxRounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClientState {
    pub accepted_count: u32,
    pub request_quota: u32,
}

impl ClientState {
    pub fn alive(&self) -> u32 {
        self.request_quota - self.accepted_count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ServerState {
    pub accepted_load: u64,
    pub cumulative_received: u64,
    /// Always false under RAES.
    pub burned: bool,
}

/// One ball request: the client and the index of the ball among that
/// client's balls still alive at the start of the round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BallRequest {
    pub client: u32,
    pub slot: u32,
}

/// Phase-1 output, grouped by destination server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestBatch {
    round: u32,
    offsets: Vec<usize>,
    entries: Vec<BallRequest>,
}

impl RequestBatch {
    /// Round this batch was drawn for.
    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn total_requests(&self) -> usize {
        self.entries.len()
    }

    pub fn requests_to(&self, server: usize) -> &[BallRequest] {
        &self.entries[self.offsets[server]..self.offsets[server + 1]]
    }

    /// `r_t(u)`.
    pub fn received(&self, server: usize) -> u32 {
        (self.offsets[server + 1] - self.offsets[server]) as u32
    }

    pub fn per_server_counts(&self) -> Vec<u32> {
        self.offsets
            .windows(2)
            .map(|w| (w[1] - w[0]) as u32)
            .collect()
    }

    /// `(server, request)` pairs, grouped by server.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &BallRequest)> + '_ {
        self.offsets
            .windows(2)
            .enumerate()
            .flat_map(move |(u, w)| self.entries[w[0]..w[1]].iter().map(move |r| (u, r)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServerDecision {
    /// Received nothing this round.
    Idle,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase2Outcome {
    pub decisions: Vec<ServerDecision>,
    pub newly_burned: Vec<u32>,
    pub record: RoundRecord,
}

/// Full state of one run.
#[derive(Debug, Clone)]
pub struct SimState<'g> {
    graph: &'g BipartiteGraph,
    kind: ProtocolKind,
    c: u32,
    d: u32,
    seed: u64,
    round: u32,
    clients: Vec<ClientState>,
    servers: Vec<ServerState>,
    alive: u64,
    total_balls: u64,
    burned: u64,
    max_load: u64,
    tracker: MetricsTracker,
}

/// `⌈10 ln n⌉ + 10`.
pub fn default_max_rounds(n: usize) -> u32 {
    (10.0 * (n.max(1) as f64).ln()).ceil() as u32 + 10
}

impl<'g> SimState<'g> {
    /// Fresh run: nothing accepted, nothing burned, round 0. Without
    /// `quotas` every client has `d` balls.
    pub fn new(
        graph: &'g BipartiteGraph,
        kind: ProtocolKind,
        c: u32,
        d: u32,
        quotas: Option<&[u32]>,
        seed: u64,
        level: MetricsLevel,
    ) -> Result<Self, ProtocolError> {
        if c == 0 || d == 0 {
            return Err(ProtocolError::BadParameters { c, d });
        }
        let n = graph.n_clients();
        if n == 0 {
            return Err(ProtocolError::EmptyGraph);
        }
        let clients: Vec<ClientState> = match quotas {
            None => vec![
                ClientState {
                    accepted_count: 0,
                    request_quota: d
                };
                n
            ],
            Some(q) => {
                if q.len() != n {
                    return Err(ProtocolError::QuotaLength {
                        expected: n,
                        got: q.len(),
                    });
                }
                q.iter()
                    .enumerate()
                    .map(|(client, &quota)| {
                        if quota > d {
                            Err(ProtocolError::QuotaExceedsD { client, quota, d })
                        } else {
                            Ok(ClientState {
                                accepted_count: 0,
                                request_quota: quota,
                            })
                        }
                    })
                    .collect::<Result<_, _>>()?
            }
        };
        let total_balls = clients.iter().map(|c| u64::from(c.request_quota)).sum();
        Ok(Self {
            graph,
            kind,
            c,
            d,
            seed,
            round: 0,
            clients,
            servers: vec![ServerState::default(); graph.n_servers()],
            alive: total_balls,
            total_balls,
            burned: 0,
            max_load: 0,
            tracker: MetricsTracker::new(graph, level),
        })
    }

    pub fn graph(&self) -> &'g BipartiteGraph {
        self.graph
    }

    pub fn kind(&self) -> ProtocolKind {
        self.kind
    }

    pub fn c(&self) -> u32 {
        self.c
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Rounds executed so far.
    pub fn round(&self) -> u32 {
        self.round
    }

    /// The load cap `c·d`.
    pub fn threshold(&self) -> u64 {
        u64::from(self.c) * u64::from(self.d)
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn servers(&self) -> &[ServerState] {
        &self.servers
    }

    pub fn alive(&self) -> u64 {
        self.alive
    }

    pub fn total_balls(&self) -> u64 {
        self.total_balls
    }

    pub fn burned_servers(&self) -> u64 {
        self.burned
    }

    pub fn max_load(&self) -> u64 {
        self.max_load
    }

    pub fn metrics(&self) -> &MetricsTracker {
        &self.tracker
    }

    pub fn is_complete(&self) -> bool {
        self.alive == 0
    }

    /// Phase 1 of the next round. Only the draws are computed; the state is
    /// left untouched.
    pub fn phase1(&self) -> Result<RequestBatch, ProtocolError> {
        if self.is_complete() {
            return Err(ProtocolError::AlreadyComplete);
        }
        let round = self.round + 1;
        let n_servers = self.graph.n_servers();
        let mut targets: Vec<(u32, BallRequest)> = Vec::with_capacity(self.alive as usize);
        let mut counts = vec![0usize; n_servers];
        for (v, client) in self.clients.iter().enumerate() {
            let alive = client.alive();
            if alive == 0 {
                continue;
            }
            let nbrs = self.graph.client_neighbors(v);
            let mut rng = round_client_stream(self.seed, round, v as u32);
            for slot in 0..alive {
                let u = nbrs[rng.random_range(0..nbrs.len())];
                counts[u as usize] += 1;
                targets.push((
                    u,
                    BallRequest {
                        client: v as u32,
                        slot,
                    },
                ));
            }
        }
        let mut offsets = Vec::with_capacity(n_servers + 1);
        offsets.push(0);
        for &k in &counts {
            offsets.push(offsets.last().unwrap() + k);
        }
        let mut cursor = offsets[..n_servers].to_vec();
        let mut entries = vec![BallRequest { client: 0, slot: 0 }; targets.len()];
        for (u, req) in targets {
            let pos = &mut cursor[u as usize];
            entries[*pos] = req;
            *pos += 1;
        }
        Ok(RequestBatch {
            round,
            offsets,
            entries,
        })
    }

    /// Phase 2: servers answer `batch`, clients count their accepted balls,
    /// and the round counter advances.
    pub fn phase2(&mut self, batch: &RequestBatch) -> Result<Phase2Outcome, ProtocolError> {
        let expected = self.round + 1;
        if batch.round != expected || batch.offsets.len() != self.servers.len() + 1 {
            return Err(ProtocolError::StaleBatch {
                batch: batch.round,
                expected,
            });
        }
        let cd = self.threshold();
        let requests_sent = batch.total_requests() as u64;
        let mut decisions = Vec::with_capacity(self.servers.len());
        let mut newly_burned = Vec::new();
        let mut accepted = 0u64;

        for (u, server) in self.servers.iter_mut().enumerate() {
            let r = u64::from(batch.received(u));
            server.cumulative_received += r;
            let decision = match self.kind {
                ProtocolKind::Saer => {
                    if server.burned {
                        if r > 0 {
                            ServerDecision::Rejected
                        } else {
                            ServerDecision::Idle
                        }
                    } else if server.cumulative_received > cd {
                        server.burned = true;
                        newly_burned.push(u as u32);
                        ServerDecision::Rejected
                    } else if r > 0 {
                        ServerDecision::Accepted
                    } else {
                        ServerDecision::Idle
                    }
                }
                ProtocolKind::Raes => {
                    if r == 0 {
                        ServerDecision::Idle
                    } else if server.accepted_load + r > cd {
                        ServerDecision::Rejected
                    } else {
                        ServerDecision::Accepted
                    }
                }
            };
            if decision == ServerDecision::Accepted {
                server.accepted_load += r;
                accepted += r;
                self.max_load = self.max_load.max(server.accepted_load);
                for req in batch.requests_to(u) {
                    self.clients[req.client as usize].accepted_count += 1;
                }
            }
            decisions.push(decision);
        }
        debug_assert!(self.max_load <= cd);

        self.round = expected;
        self.alive -= accepted;
        self.burned += newly_burned.len() as u64;

        let observed = self.tracker.observe(
            self.graph,
            self.c,
            self.d,
            &batch.per_server_counts(),
            &newly_burned,
        );
        let record = RoundRecord {
            round: self.round,
            requests_sent,
            accepted,
            alive_after: self.alive,
            burned_servers: self.burned,
            s_t: observed.map(|o| o.s_t),
            k_t: observed.map(|o| o.k_t),
            r_t_max: observed.map(|o| o.r_t_max),
            messages: 2 * requests_sent,
        };
        Ok(Phase2Outcome {
            decisions,
            newly_burned,
            record,
        })
    }

    /// One full round.
    pub fn step(&mut self) -> Result<RoundRecord, ProtocolError> {
        let batch = self.phase1()?;
        Ok(self.phase2(&batch)?.record)
    }

    /// Steps until every ball is placed or `max_rounds` rounds have been
    /// executed in total. Running out of rounds is reported through
    /// `completion_round = None`, not as an error.
    pub fn run_to_completion(&mut self, max_rounds: u32) -> Result<RunResult, ProtocolError> {
        if max_rounds == 0 {
            return Err(ProtocolError::ZeroMaxRounds);
        }
        let mut trajectory = Vec::new();
        while !self.is_complete() && self.round < max_rounds {
            trajectory.push(self.step()?);
        }
        let work = trajectory.iter().map(|r| r.messages).sum();
        Ok(RunResult {
            kind: self.kind,
            n: self.graph.n(),
            c: self.c,
            d: self.d,
            seed: self.seed,
            max_rounds,
            completion_round: self.is_complete().then_some(self.round),
            work,
            max_load: self.max_load,
            total_balls: self.total_balls,
            trajectory,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_regular;

    fn complete(n: u32) -> BipartiteGraph {
        BipartiteGraph::from_edges(n as usize, (0..n).flat_map(|v| (0..n).map(move |u| (v, u))))
            .unwrap()
    }

    fn matching(n: u32) -> BipartiteGraph {
        BipartiteGraph::from_edges(n as usize, (0..n).map(|v| (v, v))).unwrap()
    }

    fn state(g: &BipartiteGraph, kind: ProtocolKind, c: u32, d: u32, seed: u64) -> SimState<'_> {
        SimState::new(g, kind, c, d, None, seed, MetricsLevel::Full).unwrap()
    }

    /// Batch with a chosen server for every request, bypassing the RNG.
    fn forced_batch(s: &SimState<'_>, targets: &[(u32, u32)]) -> RequestBatch {
        let n = s.servers().len();
        let mut per: Vec<Vec<BallRequest>> = vec![Vec::new(); n];
        let mut slots = vec![0u32; s.clients().len()];
        for &(client, server) in targets {
            per[server as usize].push(BallRequest {
                client,
                slot: slots[client as usize],
            });
            slots[client as usize] += 1;
        }
        let mut offsets = vec![0];
        let mut entries = Vec::new();
        for list in per {
            entries.extend(list);
            offsets.push(entries.len());
        }
        RequestBatch {
            round: s.round() + 1,
            offsets,
            entries,
        }
    }

    #[test]
    fn new_run_counts_balls() {
        let g = complete(2);
        let s = state(&g, ProtocolKind::Saer, 1, 1, 0);
        assert_eq!(s.alive(), 2);
        assert_eq!(s.round(), 0);
        assert!(s
            .servers()
            .iter()
            .all(|u| !u.burned && u.accepted_load == 0));
    }

    #[test]
    fn zero_quotas_complete_immediately() {
        let g = complete(3);
        let mut s = SimState::new(
            &g,
            ProtocolKind::Saer,
            1,
            2,
            Some(&[0, 0, 0]),
            4,
            MetricsLevel::Full,
        )
        .unwrap();
        assert!(s.is_complete());
        let res = s.run_to_completion(10).unwrap();
        assert_eq!(res.completion_round, Some(0));
        assert_eq!(res.work, 0);
        assert!(res.trajectory.is_empty());
    }

    #[test]
    fn new_run_errors() {
        let g = complete(2);
        assert_eq!(
            SimState::new(
                &g,
                ProtocolKind::Saer,
                1,
                1,
                Some(&[1, 2]),
                0,
                MetricsLevel::Full
            )
            .unwrap_err(),
            ProtocolError::QuotaExceedsD {
                client: 1,
                quota: 2,
                d: 1
            }
        );
        assert_eq!(
            SimState::new(
                &g,
                ProtocolKind::Saer,
                1,
                1,
                Some(&[1]),
                0,
                MetricsLevel::Full
            )
            .unwrap_err(),
            ProtocolError::QuotaLength {
                expected: 2,
                got: 1
            }
        );
        assert_eq!(
            SimState::new(&g, ProtocolKind::Saer, 0, 1, None, 0, MetricsLevel::Full).unwrap_err(),
            ProtocolError::BadParameters { c: 0, d: 1 }
        );
    }

    #[test]
    fn phase1_skips_done_clients_and_respects_support() {
        let g = BipartiteGraph::from_client_adj(2, vec![vec![1], vec![0, 1]]).unwrap();
        let mut s = SimState::new(
            &g,
            ProtocolKind::Saer,
            5,
            2,
            Some(&[2, 0]),
            9,
            MetricsLevel::Full,
        )
        .unwrap();
        let batch = s.phase1().unwrap();
        assert_eq!(batch.total_requests(), 2);
        assert_eq!(batch.received(1), 2);
        assert!(batch.iter().all(|(_, r)| r.client == 0));
        let before = s.clients().to_vec();
        // phase1 is read-only
        assert_eq!(s.clients(), &before[..]);
        s.phase2(&batch).unwrap();
        assert!(s.is_complete());
    }

    #[test]
    fn phase1_round_one_sends_every_ball() {
        let g = generate_regular(1000, 60, 7).unwrap();
        let s = state(&g, ProtocolKind::Saer, 32, 2, 1);
        assert_eq!(s.phase1().unwrap().total_requests(), 2000);
    }

    #[test]
    fn phase1_is_deterministic() {
        let g = generate_regular(50, 5, 1).unwrap();
        let a = state(&g, ProtocolKind::Saer, 2, 3, 42).phase1().unwrap();
        let b = state(&g, ProtocolKind::Raes, 9, 3, 42).phase1().unwrap();
        assert_eq!(a, b);
        let c = state(&g, ProtocolKind::Saer, 2, 3, 43).phase1().unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn saer_burn_trace() {
        // threshold cd = 2
        let g = complete(3);
        let mut s = state(&g, ProtocolKind::Saer, 2, 1, 0);
        let b1 = forced_batch(&s, &[(0, 0), (1, 0)]);
        let out = s.phase2(&b1).unwrap();
        assert_eq!(out.decisions[0], ServerDecision::Accepted);
        assert!(!s.servers()[0].burned);
        assert_eq!(s.servers()[0].accepted_load, 2);
        let b2 = forced_batch(&s, &[(2, 0)]);
        let out = s.phase2(&b2).unwrap();
        assert_eq!(out.decisions[0], ServerDecision::Rejected);
        assert_eq!(out.newly_burned, vec![0]);
        assert!(s.servers()[0].burned);
        assert_eq!(s.servers()[0].cumulative_received, 3);
        assert_eq!(s.servers()[0].accepted_load, 2);
        // burned servers reject from now on, even small batches
        let b3 = forced_batch(&s, &[(2, 0)]);
        assert_eq!(
            s.phase2(&b3).unwrap().decisions[0],
            ServerDecision::Rejected
        );
    }

    #[test]
    fn saer_burns_on_first_oversized_batch() {
        let g = complete(3);
        let mut s = state(&g, ProtocolKind::Saer, 1, 1, 0);
        let b = forced_batch(&s, &[(0, 1), (1, 1)]);
        let out = s.phase2(&b).unwrap();
        assert_eq!(out.decisions[1], ServerDecision::Rejected);
        assert!(s.servers()[1].burned);
        assert_eq!(s.servers()[1].accepted_load, 0);
        assert_eq!(out.record.burned_servers, 1);
    }

    #[test]
    fn raes_saturation_trace() {
        // cd = 2, server 0 starts at load 1
        let g = complete(4);
        let mut s = state(&g, ProtocolKind::Raes, 2, 1, 0);
        s.phase2(&forced_batch(&s, &[(0, 0)])).unwrap();
        assert_eq!(s.servers()[0].accepted_load, 1);
        let out = s.phase2(&forced_batch(&s, &[(1, 0), (2, 0)])).unwrap();
        assert_eq!(out.decisions[0], ServerDecision::Rejected);
        assert!(!s.servers()[0].burned);
        assert_eq!(s.servers()[0].accepted_load, 1);
        let out = s.phase2(&forced_batch(&s, &[(1, 0)])).unwrap();
        assert_eq!(out.decisions[0], ServerDecision::Accepted);
        assert_eq!(s.servers()[0].accepted_load, 2);
        assert!(out.newly_burned.is_empty());
    }

    #[test]
    fn idle_servers_unchanged() {
        for kind in [ProtocolKind::Saer, ProtocolKind::Raes] {
            let g = complete(3);
            let mut s = state(&g, kind, 1, 1, 0);
            let before = s.servers()[2];
            let out = s.phase2(&forced_batch(&s, &[(0, 0)])).unwrap();
            assert_eq!(out.decisions[2], ServerDecision::Idle);
            assert_eq!(s.servers()[2], before);
        }
    }

    #[test]
    fn stale_batch_rejected() {
        let g = complete(2);
        let mut s = state(&g, ProtocolKind::Saer, 2, 1, 0);
        let batch = s.phase1().unwrap();
        s.phase2(&batch).unwrap();
        assert!(s.is_complete());
        let mut s2 = state(&g, ProtocolKind::Saer, 1, 2, 0);
        let b = s2.phase1().unwrap();
        s2.phase2(&b).unwrap();
        if !s2.is_complete() {
            assert_eq!(
                s2.phase2(&b).unwrap_err(),
                ProtocolError::StaleBatch {
                    batch: 1,
                    expected: 2
                }
            );
        }
    }

    #[test]
    fn complete_graph_c2_finishes_in_one_round() {
        // any draw pair puts at most 2 balls on a server with cd = 2
        for seed in 0..64 {
            let g = complete(2);
            let mut s = state(&g, ProtocolKind::Saer, 2, 1, seed);
            let rec = s.step().unwrap();
            assert_eq!(rec.accepted, 2);
            assert!(s.is_complete());
            assert_eq!(s.step().unwrap_err(), ProtocolError::AlreadyComplete);
        }
    }

    #[test]
    fn matching_finishes_in_one_round() {
        let g = matching(2);
        let mut s = state(&g, ProtocolKind::Saer, 1, 1, 3);
        let res = s.run_to_completion(default_max_rounds(2)).unwrap();
        assert_eq!(res.completion_round, Some(1));
        assert_eq!(res.work, 4);
        assert_eq!(res.max_load, 1);
    }

    #[test]
    fn complete_graph_c1_can_burn_out() {
        // both clients on one server twice in a row burns both servers
        let g = complete(2);
        let stuck = (0..200u64)
            .filter(|&seed| {
                let mut s = state(&g, ProtocolKind::Saer, 1, 1, seed);
                !s.run_to_completion(20).unwrap().completed()
            })
            .count();
        assert!(stuck > 0);
    }

    #[test]
    fn run_to_completion_requires_rounds() {
        let g = complete(2);
        let mut s = state(&g, ProtocolKind::Saer, 1, 1, 0);
        assert_eq!(
            s.run_to_completion(0).unwrap_err(),
            ProtocolError::ZeroMaxRounds
        );
    }

    #[test]
    fn default_max_rounds_formula() {
        assert_eq!(default_max_rounds(4096), 94);
        assert_eq!(default_max_rounds(1), 10);
    }

    #[test]
    fn kind_parsing_and_display() {
        assert_eq!("saer".parse::<ProtocolKind>().unwrap(), ProtocolKind::Saer);
        assert_eq!("RAES".parse::<ProtocolKind>().unwrap(), ProtocolKind::Raes);
        assert!("best-of-2".parse::<ProtocolKind>().is_err());
        assert_eq!(ProtocolKind::Raes.to_string(), "RAES");
    }
}
