//! On-disk formats: `rounds.csv`, `trials.csv`, `summary.json`, `run.json`
//! and the theory envelope.
//!
//! Every CSV starts with a `# saer-<kind> v1` line; readers skip `#` lines
//! and locate columns by header name. Missing optional values are empty
//! cells.

use std::fmt::Display;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::{ExperimentOutput, Resolved};
use super::summary::{AggregateSummary, TrialStats};
use super::{HarnessError, Result};
use crate::graph::DegreeReport;
use crate::metrics::{MetricsLevel, RoundRecord, RunResult};
use crate::protocol::ProtocolKind;
use crate::theory::{TheoryEnvelope, TheoryParams};

pub const ROUNDS_FILE: &str = "rounds.csv";
pub const TRIALS_FILE: &str = "trials.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RUN_FILE: &str = "run.json";

pub const ROUNDS_SCHEMA: &str = "# saer-rounds v1";
pub const TRIALS_SCHEMA: &str = "# saer-trials v1";
pub const ENVELOPE_SCHEMA: &str = "# saer-envelope v1";

pub const ROUNDS_COLUMNS: [&str; 10] = [
    "trial",
    "round",
    "requests_sent",
    "accepted",
    "alive_after",
    "burned_servers",
    "S_t",
    "K_t",
    "r_t_max",
    "messages",
];

pub const TRIALS_COLUMNS: [&str; 10] = [
    "trial",
    "seed",
    "completion_round",
    "rounds",
    "work",
    "work_per_ball",
    "max_load",
    "max_S_t",
    "gamma_violations",
    "delta_violations",
];

fn opt<T: Display>(x: Option<T>) -> String {
    x.map_or_else(String::new, |x| x.to_string())
}

fn write_header<W: Write>(w: &mut W, schema: &str, columns: &[&str]) -> std::io::Result<()> {
    writeln!(w, "{schema}")?;
    writeln!(w, "{}", columns.join(","))
}

pub fn write_rounds_csv<'a, W: Write>(
    mut w: W,
    runs: impl IntoIterator<Item = (u64, &'a RunResult)>,
) -> std::io::Result<()> {
    write_header(&mut w, ROUNDS_SCHEMA, &ROUNDS_COLUMNS)?;
    for (trial, run) in runs {
        for r in &run.trajectory {
            writeln!(
                w,
                "{trial},{},{},{},{},{},{},{},{},{}",
                r.round,
                r.requests_sent,
                r.accepted,
                r.alive_after,
                r.burned_servers,
                opt(r.s_t),
                opt(r.k_t),
                opt(r.r_t_max),
                r.messages
            )?;
        }
    }
    w.flush()
}

pub fn write_trials_csv<'a, W: Write>(
    mut w: W,
    trials: impl IntoIterator<Item = &'a TrialStats>,
) -> std::io::Result<()> {
    write_header(&mut w, TRIALS_SCHEMA, &TRIALS_COLUMNS)?;
    for t in trials {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            t.trial,
            t.seed,
            t.completion_round,
            t.rounds,
            t.work,
            t.work_per_ball,
            t.max_load,
            opt(t.max_s_t),
            opt(t.gamma_violations),
            opt(t.delta_violations)
        )?;
    }
    w.flush()
}

/// `t, γ_t, Π_{j<t} γ_j, δ_t` for every tabulated `t`.
pub fn write_envelope_csv<W: Write>(mut w: W, env: &TheoryEnvelope) -> std::io::Result<()> {
    write_header(
        &mut w,
        ENVELOPE_SCHEMA,
        &["t", "gamma_t", "product_t", "delta_t"],
    )?;
    for (t, g, p, d) in env.rows() {
        writeln!(w, "{t},{g},{p},{}", opt(d))?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeHeader {
    #[serde(rename = "T")]
    pub horizon: u32,
    pub completion_bound: u32,
    pub recommended_c: u32,
    pub alpha: f64,
    pub ratio: f64,
    pub params: TheoryParams,
}

impl EnvelopeHeader {
    pub fn of(env: &TheoryEnvelope) -> Self {
        Self {
            horizon: env.horizon.t,
            completion_bound: env.completion_bound,
            recommended_c: env.recommended_c,
            alpha: env.alpha,
            ratio: env.params.ratio(),
            params: env.params,
        }
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub schema: String,
    pub config: Resolved,
    pub theory: Option<EnvelopeHeader>,
    pub summary: AggregateSummary,
}

pub const SUMMARY_SCHEMA: &str = "saer-summary v1";
pub const RUN_SCHEMA: &str = "saer-run v1";

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFile {
    pub schema: String,
    pub kind: ProtocolKind,
    pub n: usize,
    pub c: u32,
    pub d: u32,
    pub seed: u64,
    pub max_rounds: u32,
    pub metrics: MetricsLevel,
    /// `-1` on non-termination.
    pub completion_round: i64,
    pub rounds: u32,
    pub work: u64,
    pub work_per_ball: f64,
    pub max_load: u64,
    pub total_balls: u64,
    #[serde(rename = "max_S_t")]
    pub max_s_t: Option<f64>,
    pub degrees: DegreeReport,
}

impl RunFile {
    pub fn of(run: &RunResult, metrics: MetricsLevel, degrees: DegreeReport) -> Self {
        Self {
            schema: RUN_SCHEMA.into(),
            kind: run.kind,
            n: run.n,
            c: run.c,
            d: run.d,
            seed: run.seed,
            max_rounds: run.max_rounds,
            metrics,
            completion_round: run.completion_round.map_or(-1, i64::from),
            rounds: run.trajectory.len() as u32,
            work: run.work,
            work_per_ball: run.work_per_ball(),
            max_load: run.max_load,
            total_balls: run.total_balls,
            max_s_t: run.max_s_t(),
            degrees,
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Writes `rounds.csv`, `trials.csv` and `summary.json` into `dir`.
pub fn write_experiment(dir: &Path, out: &ExperimentOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_rounds_csv(
        BufWriter::new(File::create(dir.join(ROUNDS_FILE))?),
        out.runs.iter().enumerate().map(|(i, r)| (i as u64, r)),
    )?;
    write_trials_csv(
        BufWriter::new(File::create(dir.join(TRIALS_FILE))?),
        out.stats.trials(),
    )?;
    let file = SummaryFile {
        schema: SUMMARY_SCHEMA.into(),
        config: out.resolved.clone(),
        theory: out.envelope.as_ref().map(EnvelopeHeader::of),
        summary: out.summary.clone(),
    };
    write_json(&dir.join(SUMMARY_FILE), &file)
}

/// Writes `rounds.csv` and `run.json` for a single run.
pub fn write_run(
    dir: &Path,
    run: &RunResult,
    metrics: MetricsLevel,
    degrees: DegreeReport,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_rounds_csv(
        BufWriter::new(File::create(dir.join(ROUNDS_FILE))?),
        [(0, run)],
    )?;
    write_json(&dir.join(RUN_FILE), &RunFile::of(run, metrics, degrees))
}

/// One parsed line of `rounds.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRow {
    pub trial: u64,
    pub record: RoundRecord,
}

struct Columns {
    idx: Vec<usize>,
}

impl Columns {
    fn locate(headers: &csv::StringRecord, wanted: &[&str], file: &str) -> Result<Self> {
        let idx = wanted
            .iter()
            .map(|name| {
                headers
                    .iter()
                    .position(|h| h.trim() == *name)
                    .ok_or_else(|| HarnessError::Schema(format!("{file}: missing column `{name}`")))
            })
            .collect::<Result<_>>()?;
        Ok(Self { idx })
    }

    fn cell<'r>(&self, rec: &'r csv::StringRecord, i: usize) -> &'r str {
        rec.get(self.idx[i]).unwrap_or("").trim()
    }
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    cols: &Columns,
    i: usize,
    name: &str,
    file: &str,
) -> Result<T> {
    let s = cols.cell(rec, i);
    s.parse().map_err(|_| {
        let line = rec.position().map_or(0, |p| p.line());
        HarnessError::Schema(format!("{file} line {line}: bad `{name}` value `{s}`"))
    })
}

fn opt_field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    cols: &Columns,
    i: usize,
    name: &str,
    file: &str,
) -> Result<Option<T>> {
    if cols.cell(rec, i).is_empty() {
        Ok(None)
    } else {
        field(rec, cols, i, name, file).map(Some)
    }
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

pub fn read_rounds_csv<R: Read>(r: R) -> Result<Vec<RoundRow>> {
    const FILE: &str = ROUNDS_FILE;
    let mut rdr = csv_reader(r);
    let cols = Columns::locate(rdr.headers()?, &ROUNDS_COLUMNS, FILE)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| ROUNDS_COLUMNS[i];
        out.push(RoundRow {
            trial: field(&rec, &cols, 0, f(0), FILE)?,
            record: RoundRecord {
                round: field(&rec, &cols, 1, f(1), FILE)?,
                requests_sent: field(&rec, &cols, 2, f(2), FILE)?,
                accepted: field(&rec, &cols, 3, f(3), FILE)?,
                alive_after: field(&rec, &cols, 4, f(4), FILE)?,
                burned_servers: field(&rec, &cols, 5, f(5), FILE)?,
                s_t: opt_field(&rec, &cols, 6, f(6), FILE)?,
                k_t: opt_field(&rec, &cols, 7, f(7), FILE)?,
                r_t_max: opt_field(&rec, &cols, 8, f(8), FILE)?,
                messages: field(&rec, &cols, 9, f(9), FILE)?,
            },
        });
    }
    Ok(out)
}

pub fn read_trials_csv<R: Read>(r: R) -> Result<Vec<TrialStats>> {
    const FILE: &str = TRIALS_FILE;
    let mut rdr = csv_reader(r);
    let cols = Columns::locate(rdr.headers()?, &TRIALS_COLUMNS, FILE)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| TRIALS_COLUMNS[i];
        out.push(TrialStats {
            trial: field(&rec, &cols, 0, f(0), FILE)?,
            seed: field(&rec, &cols, 1, f(1), FILE)?,
            completion_round: field(&rec, &cols, 2, f(2), FILE)?,
            rounds: field(&rec, &cols, 3, f(3), FILE)?,
            work: field(&rec, &cols, 4, f(4), FILE)?,
            work_per_ball: field(&rec, &cols, 5, f(5), FILE)?,
            max_load: field(&rec, &cols, 6, f(6), FILE)?,
            max_s_t: opt_field(&rec, &cols, 7, f(7), FILE)?,
            gamma_violations: opt_field(&rec, &cols, 8, f(8), FILE)?,
            delta_violations: opt_field(&rec, &cols, 9, f(9), FILE)?,
        });
    }
    Ok(out)
}

pub fn read_summary_json<R: Read>(r: R) -> Result<SummaryFile> {
    let file: SummaryFile = serde_json::from_reader(r)
        .map_err(|e| HarnessError::Schema(format!("{SUMMARY_FILE}: {e}")))?;
    if file.schema != SUMMARY_SCHEMA {
        return Err(HarnessError::Schema(format!(
            "{SUMMARY_FILE}: unsupported schema `{}`",
            file.schema
        )));
    }
    Ok(file)
}
