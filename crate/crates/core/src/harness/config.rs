//! Experiment configuration (JSON file or command-line flags).
//!
//! ```json
//! {
//!   "graph": { "type": "regular", "n": 4096, "delta": 623, "seed": 1 },
//!   "kind": "SAER",
//!   "c": "auto",
//!   "d": 1,
//!   "trials": 100,
//!   "base_seed": 1000,
//!   "metrics": "full"
//! }
//! ```

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::graph::{self, BipartiteGraph};
use crate::metrics::MetricsLevel;
use crate::protocol::ProtocolKind;
use crate::rng::round_client_stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Regular {
        n: usize,
        delta: usize,
        #[serde(default)]
        seed: u64,
    },
    AlmostRegular {
        n: usize,
        delta_min_c: usize,
        rho: f64,
        heavy_fraction: f64,
        #[serde(default)]
        seed: u64,
    },
    File {
        path: PathBuf,
    },
}

impl GraphSpec {
    pub fn build(&self) -> Result<BipartiteGraph> {
        Ok(match self {
            GraphSpec::Regular { n, delta, seed } => graph::generate_regular(*n, *delta, *seed)?,
            GraphSpec::AlmostRegular {
                n,
                delta_min_c,
                rho,
                heavy_fraction,
                seed,
            } => graph::generate_almost_regular(*n, *delta_min_c, *rho, *heavy_fraction, *seed)?,
            GraphSpec::File { path } => {
                let file = File::open(path)?;
                graph::load_graph(BufReader::new(file))?
            }
        })
    }
}

/// Threshold constant: explicit, or `"auto"` for the recommended value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CSetting {
    #[default]
    Auto,
    Fixed(u32),
}

impl std::str::FromStr for CSetting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(CSetting::Auto);
        }
        match s.parse::<u32>() {
            Ok(c) if c >= 1 => Ok(CSetting::Fixed(c)),
            _ => Err(format!(
                "c must be a positive integer or `auto` (got `{s}`)"
            )),
        }
    }
}

impl Serialize for CSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CSetting::Auto => s.serialize_str("auto"),
            CSetting::Fixed(c) => s.serialize_u32(*c),
        }
    }
}

impl<'de> Deserialize<'de> for CSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u32),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(0) => Err(serde::de::Error::custom("c must be at least 1")),
            Raw::Num(c) => Ok(CSetting::Fixed(c)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// How many balls each client starts with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuotaPolicy {
    /// Every client has `d` balls.
    #[default]
    Full,
    /// No balls at all.
    Zero,
    /// Each client draws its quota uniformly from `0..=d`, per trial.
    Uniform,
}

impl std::str::FromStr for QuotaPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(QuotaPolicy::Full),
            "zero" => Ok(QuotaPolicy::Zero),
            "uniform" => Ok(QuotaPolicy::Uniform),
            other => Err(format!(
                "unknown quota policy `{other}` (expected full, zero or uniform)"
            )),
        }
    }
}

impl QuotaPolicy {
    /// Per-client quotas for a trial, or `None` for the all-`d` default.
    pub fn quotas(self, n: usize, d: u32, seed: u64) -> Option<Vec<u32>> {
        match self {
            QuotaPolicy::Full => None,
            QuotaPolicy::Zero => Some(vec![0; n]),
            QuotaPolicy::Uniform => {
                // round 0 is never used by Phase 1
                let mut rng = round_client_stream(seed, 0, 0);
                Some((0..n).map(|_| rng.random_range(0..=d)).collect())
            }
        }
    }
}

fn default_trials() -> u32 {
    1
}

fn default_d() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    #[serde(default = "default_kind")]
    pub kind: ProtocolKind,
    #[serde(default)]
    pub c: CSetting,
    #[serde(default = "default_d")]
    pub d: u32,
    #[serde(default)]
    pub quotas: QuotaPolicy,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub max_rounds: Option<u32>,
    #[serde(default)]
    pub metrics: MetricsLevel,
    /// η used for `c = "auto"` and the envelope; defaults to
    /// `Δmin(C)/(ln n)²`.
    #[serde(default)]
    pub eta: Option<f64>,
    /// ρ used for `c = "auto"`; defaults to `max(1, Δmax(S)/Δmin(C))`.
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_kind() -> ProtocolKind {
    ProtocolKind::Saer
}

impl ExperimentConfig {
    pub fn new(graph: GraphSpec) -> Self {
        Self {
            graph,
            kind: ProtocolKind::Saer,
            c: CSetting::Auto,
            d: 1,
            quotas: QuotaPolicy::Full,
            trials: 1,
            base_seed: 0,
            max_rounds: None,
            metrics: MetricsLevel::Full,
            eta: None,
            rho: None,
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if self.max_rounds == Some(0) {
            return bad("max_rounds must be at least 1".into());
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0) || !eta.is_finite() {
                return bad(format!("eta must be positive (got {eta})"));
            }
        }
        if let Some(rho) = self.rho {
            if !(rho >= 1.0) || !rho.is_finite() {
                return bad(format!("rho must be ≥ 1 (got {rho})"));
            }
        }
        Ok(())
    }
}

/// Parses and validates a JSON configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = parse_config(
            r#"{
                "graph": {"type": "regular", "n": 64, "delta": 8, "seed": 3},
                "kind": "RAES", "c": 40, "d": 2, "quotas": "uniform",
                "trials": 5, "base_seed": 10, "max_rounds": 50, "metrics": "light",
                "eta": 2.5, "rho": 1.0, "out_dir": "out"
            }"#,
        )
        .unwrap();
        assert_eq!(
            cfg.graph,
            GraphSpec::Regular {
                n: 64,
                delta: 8,
                seed: 3
            }
        );
        assert_eq!(cfg.kind, ProtocolKind::Raes);
        assert_eq!(cfg.c, CSetting::Fixed(40));
        assert_eq!(cfg.quotas, QuotaPolicy::Uniform);
        assert_eq!(cfg.metrics, MetricsLevel::Light);
        assert_eq!(cfg.max_rounds, Some(50));
    }

    #[test]
    fn defaults() {
        let cfg = parse_config(r#"{"graph": {"type": "file", "path": "g.txt"}}"#).unwrap();
        assert_eq!(cfg.kind, ProtocolKind::Saer);
        assert_eq!(cfg.c, CSetting::Auto);
        assert_eq!(cfg.d, 1);
        assert_eq!(cfg.trials, 1);
        assert_eq!(cfg.metrics, MetricsLevel::Full);
    }

    #[test]
    fn c_setting_forms() {
        assert_eq!("auto".parse::<CSetting>().unwrap(), CSetting::Auto);
        assert_eq!("7".parse::<CSetting>().unwrap(), CSetting::Fixed(7));
        assert!("0".parse::<CSetting>().is_err());
        assert!(parse_config(r#"{"graph": {"type": "file", "path": "g"}, "c": 0}"#).is_err());
        assert!(parse_config(r#"{"graph": {"type": "file", "path": "g"}, "c": "big"}"#).is_err());
        let json = serde_json::to_string(&CSetting::Auto).unwrap();
        assert_eq!(json, "\"auto\"");
    }

    #[test]
    fn rejects_invalid() {
        for text in [
            r#"{"graph": {"type": "file", "path": "g"}, "trials": 0}"#,
            r#"{"graph": {"type": "file", "path": "g"}, "d": 0}"#,
            r#"{"graph": {"type": "file", "path": "g"}, "eta": -1}"#,
            r#"{"graph": {"type": "file", "path": "g"}, "rho": 0.5}"#,
            r#"{"graph": {"type": "file", "path": "g"}, "bogus": 1}"#,
            r#"{"graph": {"type": "torus", "n": 3}}"#,
            r#"not json"#,
        ] {
            assert!(
                matches!(parse_config(text), Err(HarnessError::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn quota_policies() {
        assert_eq!(QuotaPolicy::Full.quotas(3, 2, 0), None);
        assert_eq!(QuotaPolicy::Zero.quotas(3, 2, 0), Some(vec![0, 0, 0]));
        let q = QuotaPolicy::Uniform.quotas(500, 3, 9).unwrap();
        assert!(q.iter().all(|&x| x <= 3));
        assert!((0..=3).all(|k| q.contains(&k)));
        assert_eq!(QuotaPolicy::Uniform.quotas(500, 3, 9).unwrap(), q);
    }
}
