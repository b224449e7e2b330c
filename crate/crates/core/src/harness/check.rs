//! Acceptance verdicts computed from experiment output directories.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::output::{self, RoundRow, SummaryFile};
use super::summary::{count_violations, TrialStats};
use super::Result;
use crate::metrics::MetricsLevel;
use crate::protocol::ProtocolKind;
use crate::theory::{self, TheoryEnvelope};

/// Fraction of trials (or trial-rounds) that must satisfy a statistical
/// criterion.
pub const PASS_RATE: f64 = 0.99;
/// Bounds on the mean of `W/(n·d)`.
pub const WORK_RANGE: (f64, f64) = (2.0, 8.0);
/// Largest allowed ratio between the biggest and smallest mean `W/(n·d)`.
pub const WORK_SPREAD: f64 = 1.5;
pub const DECAY_FACTOR: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIPPED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: u32,
    pub name: String,
    /// Directory (or directories) the verdict was computed from.
    pub scope: String,
    pub status: Status,
    pub detail: String,
}

impl Verdict {
    fn new(criterion: u32, name: &str, scope: &str, status: Status, detail: String) -> Self {
        Self {
            criterion,
            name: name.into(),
            scope: scope.into(),
            status,
            detail,
        }
    }
}

/// Outputs of one `experiment` invocation.
#[derive(Debug, Clone)]
pub struct CheckInput {
    pub label: String,
    pub summary: SummaryFile,
    pub trials: Vec<TrialStats>,
    pub rounds: Vec<RoundRow>,
}

impl CheckInput {
    pub fn load(dir: &Path) -> Result<Self> {
        let open = |name: &str| -> Result<BufReader<File>> {
            Ok(BufReader::new(File::open(dir.join(name))?))
        };
        Ok(Self {
            label: dir.display().to_string(),
            summary: output::read_summary_json(open(output::SUMMARY_FILE)?)?,
            trials: output::read_trials_csv(open(output::TRIALS_FILE)?)?,
            rounds: output::read_rounds_csv(open(output::ROUNDS_FILE)?)?,
        })
    }

    fn kind(&self) -> ProtocolKind {
        self.summary.config.kind
    }

    fn n(&self) -> usize {
        self.summary.config.n
    }

    fn full_metrics(&self) -> bool {
        self.summary.config.metrics == MetricsLevel::Full
    }

    fn envelope(&self) -> Option<TheoryEnvelope> {
        let params = self.summary.theory.as_ref()?.params;
        theory::envelope(&params).ok()
    }

    fn rounds_by_trial(&self) -> BTreeMap<u64, Vec<&RoundRow>> {
        let mut map: BTreeMap<u64, Vec<&RoundRow>> = BTreeMap::new();
        for row in &self.rounds {
            map.entry(row.trial).or_default().push(row);
        }
        map
    }

    fn mean_work_per_ball(&self) -> Option<f64> {
        let done: Vec<f64> = self
            .trials
            .iter()
            .filter(|t| t.completed())
            .map(|t| t.work_per_ball)
            .collect();
        (!done.is_empty()).then(|| done.iter().sum::<f64>() / done.len() as f64)
    }
}

fn required(trials: usize) -> usize {
    (PASS_RATE * trials as f64).ceil() as usize
}

fn rate_status(ok: usize, total: usize) -> Status {
    if ok >= required(total) {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn saer_only(criterion: u32, name: &str, input: &CheckInput) -> Option<Verdict> {
    (input.kind() != ProtocolKind::Saer).then(|| {
        Verdict::new(
            criterion,
            name,
            &input.label,
            Status::Skipped,
            "SAER-only criterion".into(),
        )
    })
}

fn full_only(criterion: u32, name: &str, input: &CheckInput) -> Option<Verdict> {
    (!input.full_metrics()).then(|| {
        Verdict::new(
            criterion,
            name,
            &input.label,
            Status::Skipped,
            "needs full metrics".into(),
        )
    })
}

pub fn safety(input: &CheckInput) -> Verdict {
    let cap = u64::from(input.summary.config.c) * u64::from(input.summary.config.d);
    let worst = input.trials.iter().map(|t| t.max_load).max().unwrap_or(0);
    let bad = input.trials.iter().filter(|t| t.max_load > cap).count();
    let status = if bad == 0 { Status::Pass } else { Status::Fail };
    Verdict::new(
        1,
        "safety",
        &input.label,
        status,
        format!("max load {worst}, cap c·d = {cap}, {bad} violating trials"),
    )
}

pub fn completion(input: &CheckInput) -> Verdict {
    let bound = i64::from(theory::completion_bound(input.n()));
    let total = input.trials.len();
    let within = input
        .trials
        .iter()
        .filter(|t| t.completed() && t.completion_round <= bound)
        .count();
    let done = input.trials.iter().filter(|t| t.completed()).count();
    let status = if within >= required(total) && done == total {
        Status::Pass
    } else {
        Status::Fail
    };
    Verdict::new(
        2,
        "completion",
        &input.label,
        status,
        format!("{within}/{total} within {bound} rounds, {done}/{total} within max_rounds"),
    )
}

pub fn burned_fraction(input: &CheckInput) -> Verdict {
    const NAME: &str = "burned_fraction";
    if let Some(v) = saer_only(3, NAME, input).or_else(|| full_only(3, NAME, input)) {
        return v;
    }
    let total = input.trials.len();
    let ok = input
        .trials
        .iter()
        .filter(|t| t.max_s_t.is_some_and(|s| s <= 0.5))
        .count();
    Verdict::new(
        3,
        NAME,
        &input.label,
        rate_status(ok, total),
        format!("{ok}/{total} trials with max S_t ≤ 0.5"),
    )
}

pub fn envelope_tracking(input: &CheckInput) -> Verdict {
    const NAME: &str = "envelope";
    if let Some(v) = saer_only(4, NAME, input).or_else(|| full_only(4, NAME, input)) {
        return v;
    }
    let Some(env) = input.envelope() else {
        return Verdict::new(
            4,
            NAME,
            &input.label,
            Status::Skipped,
            "no envelope for this c".into(),
        );
    };
    let by_trial = input.rounds_by_trial();
    let total = input.trials.len();
    let mut ok = 0;
    for t in &input.trials {
        let rows = by_trial.get(&t.trial).map(Vec::as_slice).unwrap_or(&[]);
        if count_violations(rows.iter().map(|r| (r.record.round, r.record.k_t)), &env)
            == Some((0, 0))
        {
            ok += 1;
        }
    }
    Verdict::new(
        4,
        NAME,
        &input.label,
        rate_status(ok, total),
        format!(
            "{ok}/{total} trials inside the envelope (T = {})",
            env.horizon.t
        ),
    )
}

pub fn alive_decay(input: &CheckInput) -> Verdict {
    const NAME: &str = "alive_decay";
    if let Some(v) = saer_only(6, NAME, input) {
        return v;
    }
    let cfg = &input.summary.config;
    let floor = input.n() as f64 * f64::from(cfg.d) / (input.n() as f64).ln();
    let mut pairs = 0;
    let mut ok = 0;
    for row in &input.rounds {
        let before = row.record.requests_sent as f64;
        if before >= floor {
            pairs += 1;
            if row.record.alive_after as f64 <= DECAY_FACTOR * before {
                ok += 1;
            }
        }
    }
    if pairs == 0 {
        return Verdict::new(
            6,
            NAME,
            &input.label,
            Status::Skipped,
            "no round starts above n·d/ln n".into(),
        );
    }
    Verdict::new(
        6,
        NAME,
        &input.label,
        rate_status(ok, pairs),
        format!("{ok}/{pairs} qualifying (trial, round) pairs decay by 4/5"),
    )
}

/// Criterion 5 over all SAER inputs.
pub fn work_linearity(inputs: &[CheckInput]) -> Verdict {
    const NAME: &str = "work_linearity";
    let saer: Vec<&CheckInput> = inputs
        .iter()
        .filter(|i| i.kind() == ProtocolKind::Saer)
        .collect();
    let scope = saer
        .iter()
        .map(|i| i.label.as_str())
        .collect::<Vec<_>>()
        .join(",");
    if saer.is_empty() {
        return Verdict::new(5, NAME, "", Status::Skipped, "no SAER input".into());
    }
    let mut means: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for i in &saer {
        if let Some(m) = i.mean_work_per_ball() {
            means.entry(i.n()).or_default().push(m);
        }
    }
    if means.is_empty() {
        return Verdict::new(5, NAME, &scope, Status::Fail, "no completed trials".into());
    }
    let points: Vec<(usize, f64)> = means
        .iter()
        .map(|(&n, ms)| (n, ms.iter().sum::<f64>() / ms.len() as f64))
        .collect();
    let lo = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let in_range = lo >= WORK_RANGE.0 && hi <= WORK_RANGE.1;
    let flat = hi / lo <= WORK_SPREAD;
    let listing = points
        .iter()
        .map(|(n, m)| format!("n={n}: {m:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    let status = if in_range && flat {
        Status::Pass
    } else {
        Status::Fail
    };
    Verdict::new(
        5,
        NAME,
        &scope,
        status,
        format!("mean W/(n·d) {listing}; max/min {:.4}", hi / lo),
    )
}

fn median_completion(input: &CheckInput) -> f64 {
    let mut v: Vec<f64> = input
        .trials
        .iter()
        .map(|t| {
            if t.completed() {
                t.completion_round as f64
            } else {
                f64::INFINITY
            }
        })
        .collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Criterion 7 for every SAER/RAES pair run on the same graph and
/// parameters.
pub fn raes_dominance(inputs: &[CheckInput]) -> Vec<Verdict> {
    const NAME: &str = "raes_dominance";
    let key = |i: &CheckInput| {
        let c = &i.summary.config;
        serde_json::to_string(&(&c.graph, c.c, c.d, c.quotas)).unwrap_or_default()
    };
    let mut out = Vec::new();
    for s in inputs.iter().filter(|i| i.kind() == ProtocolKind::Saer) {
        for r in inputs
            .iter()
            .filter(|i| i.kind() == ProtocolKind::Raes && key(i) == key(s))
        {
            let (ms, mr) = (median_completion(s), median_completion(r));
            let nts = s.trials.iter().filter(|t| !t.completed()).count();
            let ntr = r.trials.iter().filter(|t| !t.completed()).count();
            let status = if mr <= ms && ntr <= nts {
                Status::Pass
            } else {
                Status::Fail
            };
            out.push(Verdict::new(
                7,
                NAME,
                &format!("{},{}", s.label, r.label),
                status,
                format!("median completion RAES {mr} vs SAER {ms}; non-termination RAES {ntr} vs SAER {nts}"),
            ));
        }
    }
    if out.is_empty() {
        out.push(Verdict::new(
            7,
            NAME,
            "",
            Status::Skipped,
            "no matched SAER/RAES pair".into(),
        ));
    }
    out
}

/// Every verdict `check` can compute from the given directories.
pub fn evaluate(inputs: &[CheckInput]) -> Vec<Verdict> {
    let mut out = Vec::new();
    for input in inputs {
        out.push(safety(input));
        out.push(completion(input));
        out.push(burned_fraction(input));
        out.push(envelope_tracking(input));
        out.push(alive_decay(input));
    }
    out.push(work_linearity(inputs));
    out.extend(raes_dominance(inputs));
    out.sort_by_key(|v| v.criterion);
    out
}
