#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(g) = saer::graph::parse_graph(text) {
        assert!(g.is_symmetric());
        let again = saer::graph::parse_graph(&saer::graph::to_edge_list_string(&g)).unwrap();
        assert_eq!(g, again);
    }
});
