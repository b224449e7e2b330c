use proptest::prelude::*;

use saer::graph::{generate_regular, BipartiteGraph};
use saer::metrics::MetricsLevel;
use saer::protocol::{ProtocolKind, ServerDecision, SimState};

fn kind() -> impl Strategy<Value = ProtocolKind> {
    prop_oneof![Just(ProtocolKind::Saer), Just(ProtocolKind::Raes)]
}

/// Random simple graph with every client degree in `1..=n`.
fn graph() -> impl Strategy<Value = BipartiteGraph> {
    (2usize..24).prop_flat_map(|n| {
        proptest::collection::vec(proptest::collection::btree_set(0..n as u32, 1..=n), n).prop_map(
            move |adj| {
                BipartiteGraph::from_client_adj(
                    n,
                    adj.into_iter().map(|s| s.into_iter().collect()).collect(),
                )
                .unwrap()
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn round_invariants(g in graph(), kind in kind(), c in 1u32..4, d in 1u32..4, seed: u64) {
        let cd = u64::from(c) * u64::from(d);
        let mut sim = SimState::new(&g, kind, c, d, None, seed, MetricsLevel::Full).unwrap();
        let total = sim.total_balls();
        let mut prev_alive = total;
        let mut prev_burned = vec![false; g.n_servers()];
        let mut prev_accepted: Vec<u32> = vec![0; g.n_clients()];
        while !sim.is_complete() && sim.round() < 40 {
            let batch = sim.phase1().unwrap();
            let loads_before: Vec<u64> = sim.servers().iter().map(|s| s.accepted_load).collect();
            let out = sim.phase2(&batch).unwrap();

            // safety
            prop_assert!(sim.servers().iter().all(|s| s.accepted_load <= cd));
            // conservation
            let placed: u64 = sim.servers().iter().map(|s| s.accepted_load).sum();
            prop_assert_eq!(placed + sim.alive(), total);
            let accepted_by_clients: u64 = sim.clients().iter().map(|c| u64::from(c.accepted_count)).sum();
            prop_assert_eq!(accepted_by_clients, placed);
            // monotonicity
            prop_assert!(sim.alive() <= prev_alive);
            prev_alive = sim.alive();
            for (u, s) in sim.servers().iter().enumerate() {
                prop_assert!(s.burned || !prev_burned[u]);
                prev_burned[u] = s.burned;
            }
            for (v, c) in sim.clients().iter().enumerate() {
                prop_assert!(c.accepted_count >= prev_accepted[v]);
                prop_assert!(c.accepted_count <= c.request_quota);
                prev_accepted[v] = c.accepted_count;
            }
            // atomicity: a server takes all of its batch or none of it
            for (u, decision) in out.decisions.iter().enumerate() {
                let gained = sim.servers()[u].accepted_load - loads_before[u];
                let received = u64::from(batch.received(u));
                match decision {
                    ServerDecision::Accepted => prop_assert_eq!(gained, received),
                    ServerDecision::Rejected => prop_assert_eq!(gained, 0),
                    ServerDecision::Idle => prop_assert_eq!(received, 0),
                }
            }
            if kind == ProtocolKind::Raes {
                prop_assert!(sim.servers().iter().all(|s| !s.burned));
            }
            prop_assert_eq!(out.record.messages, 2 * out.record.requests_sent);
        }
    }

    #[test]
    fn runs_are_deterministic(g in graph(), kind in kind(), c in 1u32..4, d in 1u32..4, seed: u64) {
        let run = |level| {
            SimState::new(&g, kind, c, d, None, seed, level).unwrap().run_to_completion(40).unwrap()
        };
        let a = run(MetricsLevel::Full);
        prop_assert_eq!(&a, &run(MetricsLevel::Full));
        // metrics level never changes the protocol itself
        let light = run(MetricsLevel::Light);
        prop_assert_eq!(a.completion_round, light.completion_round);
        prop_assert_eq!(a.work, light.work);
        prop_assert_eq!(a.max_load, light.max_load);
    }

    #[test]
    fn work_counts_every_request_twice(n in 4usize..40, seed: u64, kind in kind()) {
        let g = generate_regular(n, n / 2, seed).unwrap();
        let r = SimState::new(&g, kind, 2, 2, None, seed, MetricsLevel::Light)
            .unwrap()
            .run_to_completion(60)
            .unwrap();
        let sent: u64 = r.trajectory.iter().map(|t| t.requests_sent).sum();
        prop_assert_eq!(r.work, 2 * sent);
        if r.completed() {
            prop_assert!(r.work >= 2 * r.total_balls);
        }
    }
}

#[test]
fn saer_on_k22_with_c1_can_burn_out() {
    // every ball lands in round 1 unless both balls pick the same server;
    // with c = d = 1 a server burns once it sees two requests in total
    let g = BipartiteGraph::from_client_adj(2, vec![vec![0, 1], vec![0, 1]]).unwrap();
    let stuck = (0..400u64)
        .filter(|&seed| {
            let r = SimState::new(&g, ProtocolKind::Saer, 1, 1, None, seed, MetricsLevel::Full)
                .unwrap()
                .run_to_completion(30)
                .unwrap();
            !r.completed()
        })
        .count();
    assert!(stuck > 0, "expected some non-terminating runs");
}
