//! Replays the checked-in fuzz corpus through the parser entry points with
//! the same assertions as the fuzz targets.

use std::fs;
use std::path::PathBuf;

use saer::graph::{parse_graph, to_edge_list_string};
use saer::harness::output::{read_rounds_csv, read_trials_csv};
use saer::harness::parse_config;

fn corpus(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut files: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "empty corpus {}", dir.display());
    files
        .into_iter()
        .map(|p| (p.clone(), fs::read(p).unwrap()))
        .collect()
}

#[test]
fn graph_edge_list_corpus() {
    let mut parsed = 0;
    for (path, data) in corpus("graph_edge_list") {
        let Ok(text) = std::str::from_utf8(&data) else {
            continue;
        };
        if let Ok(g) = parse_graph(text) {
            assert!(g.is_symmetric(), "{}", path.display());
            assert_eq!(parse_graph(&to_edge_list_string(&g)).unwrap(), g);
            parsed += 1;
        }
    }
    assert!(parsed >= 2);
}

#[test]
fn experiment_config_corpus() {
    let mut parsed = 0;
    for (_, data) in corpus("experiment_config") {
        let Ok(text) = std::str::from_utf8(&data) else {
            continue;
        };
        if let Ok(cfg) = parse_config(text) {
            let again = parse_config(&serde_json::to_string(&cfg).unwrap()).unwrap();
            assert_eq!(again, cfg);
            parsed += 1;
        }
    }
    assert!(parsed >= 3);
}

#[test]
fn rounds_csv_corpus() {
    let mut parsed = 0;
    for (_, data) in corpus("rounds_csv") {
        parsed += usize::from(read_rounds_csv(data.as_slice()).is_ok());
        parsed += usize::from(read_trials_csv(data.as_slice()).is_ok());
    }
    assert!(parsed >= 3);
}
