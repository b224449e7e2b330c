//! Text edge-list format.
//!
//! ```text
//! # comment
//! n_clients n_servers
//! client server
//! ...
//! ```
//!
//! Indices are 0-based and whitespace separated. Blank lines and lines whose
//! first non-blank character is `#` are ignored. Edges must be unique.
//! [`save_graph`] always writes edges sorted by `(client, server)`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::{BipartiteGraph, GraphError};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: malformed header (expected `n_clients n_servers`)")]
    MalformedHeader { line: usize },
    #[error("line {line}: sides must have equal size (got {clients} and {servers})")]
    UnequalSides {
        line: usize,
        clients: usize,
        servers: usize,
    },
    #[error("line {line}: malformed edge (expected `client server`)")]
    MalformedEdge { line: usize },
    #[error("line {line}: index out of range in edge ({client}, {server}) for n={n}")]
    IndexOutOfRange {
        line: usize,
        client: u64,
        server: u64,
        n: usize,
    },
    #[error("line {line}: duplicate edge ({client}, {server})")]
    DuplicateEdge {
        line: usize,
        client: u32,
        server: u32,
    },
    #[error("missing header")]
    MissingHeader,
    #[error("invalid graph: {0}")]
    Graph(#[from] GraphError),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// Largest side accepted by the parser.
pub const MAX_SIDE: usize = 1 << 26;

/// Parses a graph from edge-list text.
pub fn parse_graph(text: &str) -> Result<BipartiteGraph, ParseError> {
    parse_lines(text.lines().map(|l| Ok(l.to_owned())))
}

/// Reads a graph from any buffered source.
pub fn load_graph<R: BufRead>(source: R) -> Result<BipartiteGraph, ParseError> {
    parse_lines(source.lines())
}

fn parse_lines(
    lines: impl Iterator<Item = io::Result<String>>,
) -> Result<BipartiteGraph, ParseError> {
    let mut n: Option<usize> = None;
    let mut adj: Vec<Vec<u32>> = Vec::new();
    let mut seen: HashSet<(u32, u32)> = HashSet::new();

    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let mut tokens = body.split_ascii_whitespace();
        let (Some(a), Some(b), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(match n {
                None => ParseError::MalformedHeader { line: lineno },
                Some(_) => ParseError::MalformedEdge { line: lineno },
            });
        };
        match n {
            None => {
                let (Ok(clients), Ok(servers)) = (a.parse::<usize>(), b.parse::<usize>()) else {
                    return Err(ParseError::MalformedHeader { line: lineno });
                };
                if clients != servers {
                    return Err(ParseError::UnequalSides {
                        line: lineno,
                        clients,
                        servers,
                    });
                }
                if clients == 0 || clients > MAX_SIDE {
                    return Err(ParseError::MalformedHeader { line: lineno });
                }
                n = Some(clients);
                adj = vec![Vec::new(); clients];
            }
            Some(n) => {
                let (Ok(client), Ok(server)) = (a.parse::<u64>(), b.parse::<u64>()) else {
                    return Err(ParseError::MalformedEdge { line: lineno });
                };
                if client >= n as u64 || server >= n as u64 {
                    return Err(ParseError::IndexOutOfRange {
                        line: lineno,
                        client,
                        server,
                        n,
                    });
                }
                let (client, server) = (client as u32, server as u32);
                if !seen.insert((client, server)) {
                    return Err(ParseError::DuplicateEdge {
                        line: lineno,
                        client,
                        server,
                    });
                }
                adj[client as usize].push(server);
            }
        }
    }
    let Some(n) = n else {
        return Err(ParseError::MissingHeader);
    };
    Ok(BipartiteGraph::from_client_adj(n, adj)?)
}

/// Writes `g` in canonical form.
pub fn save_graph<W: Write>(g: &BipartiteGraph, mut sink: W) -> io::Result<()> {
    sink.write_all(to_edge_list_string(g).as_bytes())?;
    sink.flush()
}

pub fn to_edge_list_string(g: &BipartiteGraph) -> String {
    let mut out = String::with_capacity(16 + g.edge_count() * 12);
    let _ = writeln!(out, "{} {}", g.n_clients(), g.n_servers());
    for (v, u) in g.edges() {
        let _ = writeln!(out, "{v} {u}");
    }
    out
}
