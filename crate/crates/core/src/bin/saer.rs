// `!(x >= lo)` is how range checks reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use saer::graph::{self, check_theorem_preconditions};
use saer::harness::output::{self, EnvelopeHeader, RunFile};
use saer::harness::{
    self, exit, CSetting, CheckInput, ExperimentConfig, GraphSpec, HarnessError, QuotaPolicy,
    Resolved, Status,
};
use saer::metrics::MetricsLevel;
use saer::protocol::ProtocolKind;
use saer::theory::{self, TheoryParams};

#[derive(Parser)]
#[command(
    name = "saer",
    version,
    about = "SAER/RAES parallel load-balancing simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a bipartite graph and write it as an edge list.
    Generate(GenerateArgs),
    /// Run one seeded simulation.
    Run(RunArgs),
    /// Run many seeded trials and aggregate them.
    Experiment(ExperimentArgs),
    /// Print the theoretical K_t envelope.
    Theory(TheoryArgs),
    /// Evaluate acceptance criteria on experiment output directories.
    Check(CheckArgs),
}

#[derive(Args, Default)]
struct GraphArgs {
    /// Edge-list file to load.
    #[arg(long, conflicts_with_all = ["regular", "almost_regular"])]
    graph: Option<PathBuf>,
    /// Generate a delta-regular graph.
    #[arg(long, conflicts_with = "almost_regular")]
    regular: bool,
    /// Generate an almost-regular graph.
    #[arg(long)]
    almost_regular: bool,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    delta: Option<usize>,
    #[arg(long)]
    delta_min_c: Option<usize>,
    /// Degree ratio bound (also used for `--c auto`).
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    heavy_fraction: Option<f64>,
    #[arg(long)]
    graph_seed: Option<u64>,
}

impl GraphArgs {
    fn spec(&self, seed: Option<u64>) -> Result<Option<GraphSpec>, HarnessError> {
        let need = |v: Option<usize>, flag: &str| {
            v.ok_or_else(|| HarnessError::Config(format!("--{flag} is required")))
        };
        let seed = seed.or(self.graph_seed).unwrap_or(0);
        if let Some(path) = &self.graph {
            return Ok(Some(GraphSpec::File { path: path.clone() }));
        }
        if self.regular {
            return Ok(Some(GraphSpec::Regular {
                n: need(self.n, "n")?,
                delta: need(self.delta, "delta")?,
                seed,
            }));
        }
        if self.almost_regular {
            return Ok(Some(GraphSpec::AlmostRegular {
                n: need(self.n, "n")?,
                delta_min_c: need(self.delta_min_c.or(self.delta), "delta-min-c")?,
                rho: self.rho.unwrap_or(1.0),
                heavy_fraction: self.heavy_fraction.unwrap_or(0.0),
                seed,
            }));
        }
        Ok(None)
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// η for the precondition report.
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Output file; defaults to `graph.txt` in the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, default_value = "SAER")]
    protocol: ProtocolKind,
    #[arg(long, default_value = "auto")]
    c: CSetting,
    #[arg(long, default_value_t = 1)]
    d: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_rounds: Option<u32>,
    #[arg(long, default_value = "full")]
    metrics: MetricsLevel,
    #[arg(long, default_value = "full")]
    quotas: QuotaPolicy,
    /// η for `--c auto`.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    protocol: Option<ProtocolKind>,
    #[arg(long)]
    c: Option<CSetting>,
    #[arg(long)]
    d: Option<u32>,
    #[arg(long)]
    quotas: Option<QuotaPolicy>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    base_seed: Option<u64>,
    #[arg(long)]
    max_rounds: Option<u32>,
    #[arg(long)]
    metrics: Option<MetricsLevel>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    d: u32,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Defaults to the recommended value.
    #[arg(long)]
    c: Option<u32>,
    /// Δmin(C); defaults to ⌈η (ln n)²⌉.
    #[arg(long)]
    delta: Option<usize>,
    /// Δmax(S); defaults to ⌊ρ Δmin(C)⌋.
    #[arg(long)]
    delta_max_s: Option<usize>,
    /// Also write `theory.csv` and `theory.json` here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Experiment output directories.
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
}

fn default_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(harness::OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), HarnessError> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<u8, HarnessError> {
    let spec = args.graph.spec(args.seed)?.ok_or_else(|| {
        HarnessError::Config("one of --regular, --almost-regular or --graph is required".into())
    })?;
    let g = spec.build()?;
    let path = args
        .out
        .unwrap_or_else(|| default_out_dir(None).join("graph.txt"));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(&path)?);
    graph::save_graph(&g, &mut w)?;
    w.flush()?;
    let rho = args.graph.rho.unwrap_or(1.0);
    print_json(&serde_json::json!({
        "path": path,
        "degrees": g.degree_report(),
        "preconditions": check_theorem_preconditions(&g, args.eta, rho),
        "preconditions_passed": check_theorem_preconditions(&g, args.eta, rho).passed(),
    }))?;
    Ok(exit::SUCCESS)
}

fn cmd_run(args: RunArgs) -> Result<u8, HarnessError> {
    let spec = args.graph.spec(None)?.ok_or_else(|| {
        HarnessError::Config("one of --graph, --regular or --almost-regular is required".into())
    })?;
    let mut cfg = ExperimentConfig::new(spec);
    cfg.kind = args.protocol;
    cfg.c = args.c;
    cfg.d = args.d;
    cfg.quotas = args.quotas;
    cfg.base_seed = args.seed;
    cfg.max_rounds = args.max_rounds;
    cfg.metrics = args.metrics;
    cfg.eta = args.eta;
    cfg.rho = args.graph.rho;
    cfg.validate()?;
    let g = cfg.graph.build()?;
    let resolved = Resolved::new(&cfg, &g)?;
    let run = harness::run_trial(&g, &resolved, 0)?;
    output::write_run(
        &default_out_dir(args.out_dir),
        &run,
        resolved.metrics,
        resolved.degrees,
    )?;
    print_json(&RunFile::of(&run, resolved.metrics, resolved.degrees))?;
    Ok(if run.completed() {
        exit::SUCCESS
    } else {
        exit::NON_TERMINATION
    })
}

fn cmd_experiment(args: ExperimentArgs) -> Result<u8, HarnessError> {
    let file_cfg = match &args.config {
        Some(path) => Some(harness::parse_config(&fs::read_to_string(path)?)?),
        None => None,
    };
    let flag_graph = args.graph.spec(None)?;
    let mut cfg = match (file_cfg, flag_graph) {
        (Some(mut cfg), Some(g)) => {
            cfg.graph = g;
            cfg
        }
        (Some(cfg), None) => cfg,
        (None, Some(g)) => ExperimentConfig::new(g),
        (None, None) => return Err(HarnessError::Config("need --config or graph flags".into())),
    };
    if let Some(v) = args.protocol {
        cfg.kind = v;
    }
    if let Some(v) = args.c {
        cfg.c = v;
    }
    if let Some(v) = args.d {
        cfg.d = v;
    }
    if let Some(v) = args.quotas {
        cfg.quotas = v;
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = args.base_seed {
        cfg.base_seed = v;
    }
    if args.max_rounds.is_some() {
        cfg.max_rounds = args.max_rounds;
    }
    if let Some(v) = args.metrics {
        cfg.metrics = v;
    }
    if args.eta.is_some() {
        cfg.eta = args.eta;
    }
    if args.graph.rho.is_some() {
        cfg.rho = args.graph.rho;
    }
    cfg.validate()?;
    let dir = default_out_dir(args.out_dir.or_else(|| cfg.out_dir.clone()));
    let g = cfg.graph.build()?;
    let out = harness::run_experiment(&cfg, &g)?;
    output::write_experiment(&dir, &out)?;
    print_json(&out.summary)?;
    Ok(exit::SUCCESS)
}

fn cmd_theory(args: TheoryArgs) -> Result<u8, HarnessError> {
    if args.n < 2 || !(args.eta > 0.0) || !(args.rho >= 1.0) {
        return Err(HarnessError::Config(
            "need n ≥ 2, eta > 0 and rho ≥ 1".into(),
        ));
    }
    let ln_n = (args.n as f64).ln();
    let delta = args
        .delta
        .unwrap_or_else(|| (args.eta * ln_n * ln_n).ceil() as usize);
    let delta_max_s = args
        .delta_max_s
        .unwrap_or_else(|| ((args.rho * delta as f64).floor() as usize).max(delta));
    let c = args
        .c
        .unwrap_or_else(|| theory::recommended_c(args.eta, args.rho, args.d));
    let params = TheoryParams::new(args.n, args.d, c, args.eta, args.rho, delta, delta_max_s)?;
    let env = theory::envelope(&params)?;
    let header = EnvelopeHeader::of(&env);
    let mut csv = Vec::new();
    output::write_envelope_csv(&mut csv, &env)?;
    if let Some(dir) = args.out_dir {
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("theory.csv"), &csv)?;
        fs::write(
            dir.join("theory.json"),
            serde_json::to_string_pretty(&header)? + "\n",
        )?;
    }
    print_json(&header)?;
    io::stdout().lock().write_all(&csv)?;
    Ok(exit::SUCCESS)
}

fn cmd_check(args: CheckArgs) -> Result<u8, HarnessError> {
    let inputs = args
        .dirs
        .iter()
        .map(|d| CheckInput::load(d))
        .collect::<Result<Vec<_>, _>>()?;
    let verdicts = harness::evaluate(&inputs);
    let mut out = io::stdout().lock();
    for v in &verdicts {
        serde_json::to_writer(&mut out, v)?;
        writeln!(out)?;
    }
    let failed = verdicts.iter().any(|v| v.status == Status::Fail);
    Ok(if failed {
        exit::CHECK_FAILED
    } else {
        exit::SUCCESS
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                exit::USAGE
            } else {
                exit::SUCCESS
            });
        }
    };
    let result = match cli.cmd {
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Experiment(a) => cmd_experiment(a),
        Cmd::Theory(a) => cmd_theory(a),
        Cmd::Check(a) => cmd_check(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("saer: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
