//! Simulator and analysis toolkit for the SAER and RAES threshold
//! load-balancing protocols on client–server bipartite graphs.
//!
//! The crate is split along the lines of the experiment pipeline:
//!
//! - [`graph`]: construction, validation and (de)serialization of bipartite
//!   topologies with both sides of size `n`.
//! - [`protocol`]: one seeded run of SAER or RAES, one synchronous round at a
//!   time.
//! - [`metrics`]: per-round observables (burned fractions, neighbourhood
//!   request sums, the `K_t` statistic) and run-level work accounting.
//! - [`theory`]: the `γ_t`/`δ_t` envelopes, the Stage-I horizon and the
//!   recommended threshold constant.
//! - [`harness`]: experiment configuration, multi-trial execution, CSV/JSON
//!   output and the acceptance checker behind the `saer` binary.

// `!(x >= lo)` is how range checks reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod graph;
pub mod harness;
pub mod metrics;
pub mod protocol;
pub mod rng;
pub mod theory;

pub use graph::{BipartiteGraph, DegreeReport, GraphError};
pub use metrics::{MetricsLevel, RoundRecord, RunResult};
pub use protocol::{ProtocolError, ProtocolKind, SimState};
pub use theory::{TheoryEnvelope, TheoryError, TheoryParams};
