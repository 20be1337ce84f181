//! `bdg`: run the decoding game on recorded traces or synthetic suites.
//!
//! Exit codes: 0 success, 2 bad input (parse, schema, config, arguments),
//! 3 runtime failure (I/O, degenerate scores), 4 insufficient convergence.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use bdg_core::candidates::ground_metric;
use bdg_core::game::IterationRecord;
use bdg_core::{
    compare_convergence, load_trace, run_eval, run_game, wasserstein1, AnswerRule, DecisionRule,
    Error, GameConfig, GameTrace, GroundMetric, Simplex, StoppingMode, Suite, SyntheticSpec,
    Termination, DEFAULT_SEEDS,
};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

const RUN_SCHEMA: &str = "bdg-run/1";

#[derive(Debug, Parser)]
#[command(
    name = "bdg",
    version,
    about = "Bayesian decoding game with a Wasserstein-1 stopping rule"
)]
struct Cli {
    /// Progress and the effective configuration on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Play the game on every instance of a trace file and report winners.
    Run(RunArgs),
    /// Compare decision rules on a trace file or a synthetic suite.
    Eval(EvalArgs),
    /// Compare iteration counts of the classic and Wasserstein stopping rules.
    Convergence(ConvergenceArgs),
    /// Exact Wasserstein-1 distance between two distributions.
    W1(W1Args),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML or JSON file with game settings [env: BDG_CONFIG]
    #[arg(long, env = "BDG_CONFIG", hide_env = true)]
    config: Option<PathBuf>,
    /// Sets both lambda_g and lambda_v.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lambda_g: Option<f64>,
    #[arg(long)]
    lambda_v: Option<f64>,
    /// Sets both eta_g and eta_v.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    eta_g: Option<f64>,
    #[arg(long)]
    eta_v: Option<f64>,
    /// Separation threshold for both agents.
    #[arg(long)]
    sigma: Option<f64>,
    /// Threshold on the separation-weighted W1.
    #[arg(long)]
    delta_w: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Iteration cap T.
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    n_candidates: Option<usize>,
    #[arg(long)]
    max_sampling_calls: Option<usize>,
    /// Comma-separated sampling temperatures.
    #[arg(long, value_delimiter = ',')]
    temperatures: Option<Vec<f64>>,
    /// average | generator-only | verifier-only
    #[arg(long)]
    answer_rule: Option<String>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Trace file (JSON array of instances).
    #[arg(long)]
    trace: PathBuf,
    /// classic | wasserstein
    #[arg(long)]
    stopping: Option<String>,
    /// Include every iteration record, not just the last one.
    #[arg(long)]
    full_trace: bool,
    /// Output JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false, args = ["trace", "synthetic"])]
struct SourceArgs {
    /// Trace file (JSON array of instances).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Synthetic suite spec (TOML or JSON).
    #[arg(long)]
    synthetic: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Comma-separated rules: greedy, scd, verifier, bdg-classic, bdg-w, or all.
    #[arg(long, default_value = "all")]
    rules: String,
    /// Comma-separated seeds; empty means 1,2,3,4,5.
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads; 0 uses every logical CPU.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Report JSON; the CSV goes next to it unless --csv is given.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Comma-separated seeds; empty means 1,2,3,4,5.
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads; 0 uses every logical CPU.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Report JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct W1Args {
    /// First distribution, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    p: String,
    /// Second distribution, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    q: String,
    /// Ground metric: a JSON matrix, or one row per line.
    #[arg(long)]
    metric: PathBuf,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InsufficientConvergence { .. } => 4,
            ref e if e.is_input_error() => 2,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input_failure(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CliResult<T> = Result<T, Failure>;

fn read_input(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| input_failure(format!("cannot read {}: {e}", path.display())))
}

/// JSON when the extension says so, TOML otherwise.
fn load_structured<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_input(path)?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| input_failure(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| input_failure(format!("{}: {e}", path.display())))
    }
}

fn write_output(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| {
        Failure::from(Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    })
}

impl ConfigArgs {
    /// Defaults, then the config file, then flags.
    fn resolve(&self, stopping: Option<&str>, verbose: bool) -> CliResult<GameConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_structured(path)?,
            None => GameConfig::default(),
        };
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut cfg.lambda_g, self.lambda);
        set(&mut cfg.lambda_v, self.lambda);
        set(&mut cfg.lambda_g, self.lambda_g);
        set(&mut cfg.lambda_v, self.lambda_v);
        set(&mut cfg.eta_g, self.eta);
        set(&mut cfg.eta_v, self.eta);
        set(&mut cfg.eta_g, self.eta_g);
        set(&mut cfg.eta_v, self.eta_v);
        set(&mut cfg.sigma, self.sigma);
        set(&mut cfg.delta_w, self.delta_w);
        set(&mut cfg.epsilon, self.epsilon);
        if let Some(v) = self.max_iterations {
            cfg.max_iterations = v;
        }
        if let Some(v) = self.n_candidates {
            cfg.n_candidates = v;
        }
        if let Some(v) = self.max_sampling_calls {
            cfg.max_sampling_calls = v;
        }
        if let Some(v) = &self.temperatures {
            cfg.temperatures = v.clone();
        }
        if let Some(rule) = &self.answer_rule {
            cfg.answer_rule =
                serde_json::from_value::<AnswerRule>(serde_json::Value::String(rule.clone()))
                    .map_err(|_| input_failure(format!("unknown answer rule {rule:?}")))?;
        }
        if let Some(mode) = stopping {
            cfg.stopping_mode = mode.parse::<StoppingMode>()?;
        }
        cfg.validate()?;
        if verbose {
            eprintln!(
                "config: {}",
                serde_json::to_string(&cfg).expect("config serializes")
            );
        }
        Ok(cfg)
    }
}

impl SourceArgs {
    fn load(&self) -> CliResult<Suite> {
        match (&self.trace, &self.synthetic) {
            (Some(path), _) => Ok(Suite::Traces(load_trace(path).map_err(trace_failure)?)),
            (None, Some(path)) => Ok(Suite::Synthetic(load_structured::<SyntheticSpec>(path)?)),
            (None, None) => Err(input_failure("one of --trace or --synthetic is required")),
        }
    }
}

/// A missing or unreadable input file is an input problem, not a runtime one.
fn trace_failure(e: Error) -> Failure {
    match e {
        Error::Io { .. } => input_failure(e.to_string()),
        e => e.into(),
    }
}

fn parse_seeds(raw: Option<&str>) -> CliResult<Vec<u64>> {
    let tokens: Vec<&str> = raw
        .unwrap_or("")
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.is_empty() {
        return Ok(DEFAULT_SEEDS.to_vec());
    }
    tokens
        .iter()
        .map(|t| {
            t.parse::<u64>()
                .map_err(|_| input_failure(format!("invalid seed {t:?}")))
        })
        .collect()
}

fn parse_vector(raw: &str) -> CliResult<Vec<f64>> {
    raw.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| input_failure(format!("invalid number {t:?}")))
        })
        .collect()
}

fn load_metric(path: &Path) -> CliResult<GroundMetric> {
    let text = read_input(path)?;
    let rows: Vec<Vec<f64>> = if text.trim_start().starts_with('[') {
        serde_json::from_str(&text)
            .map_err(|e| input_failure(format!("{}: {e}", path.display())))?
    } else {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(parse_vector)
            .collect::<CliResult<_>>()?
    };
    Ok(GroundMetric::from_rows(rows)?)
}

#[derive(Serialize)]
struct RunInstance {
    instance_id: String,
    candidates: Vec<String>,
    winner_index: usize,
    winner_text: String,
    iterations_used: usize,
    termination: Termination,
    #[serde(rename = "final")]
    last: Option<IterationRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<GameTrace>,
}

#[derive(Serialize)]
struct RunReport {
    schema: &'static str,
    config: GameConfig,
    instances: Vec<RunInstance>,
}

fn cmd_run(args: &RunArgs, verbose: bool) -> CliResult<()> {
    let traces = load_trace(&args.trace).map_err(trace_failure)?;
    let cfg = args.config.resolve(args.stopping.as_deref(), verbose)?;
    let mut instances = Vec::with_capacity(traces.len());
    for trace in &traces {
        let set = trace.candidate_set(&cfg)?;
        let scores = trace.init_scores(&set)?;
        let metric = ground_metric(&set)?;
        let result = run_game(&scores, &set, &metric, &cfg)?;
        if verbose {
            eprintln!(
                "{}: {} after {} ({})",
                trace.instance_id,
                result.winner_text,
                result.iterations_used,
                result.termination.as_str()
            );
        }
        instances.push(RunInstance {
            instance_id: trace.instance_id.clone(),
            candidates: set.texts().map(str::to_string).collect(),
            winner_index: result.winner_index,
            winner_text: result.winner_text,
            iterations_used: result.iterations_used,
            termination: result.termination,
            last: result.trace.records.last().cloned(),
            trace: args.full_trace.then_some(result.trace),
        });
    }
    let report = RunReport {
        schema: RUN_SCHEMA,
        config: cfg,
        instances,
    };
    let json = serde_json::to_string_pretty(&report).expect("run report serializes") + "\n";
    match &args.out {
        Some(path) => write_output(path, &json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn cmd_eval(args: &EvalArgs, verbose: bool) -> CliResult<()> {
    let suite = args.source.load()?;
    let rules = DecisionRule::parse_list(&args.rules)?;
    let seeds = parse_seeds(args.seeds.as_deref())?;
    let cfg = args.config.resolve(None, verbose)?;
    let started = Instant::now();
    let report = run_eval(&suite, &rules, &cfg, &seeds, args.workers)?;
    if verbose {
        eprintln!("{} rows in {:.2?}", report.rows.len(), started.elapsed());
    }
    if let Some(out) = &args.out {
        write_output(out, &report.to_json())?;
        let csv_path = args
            .csv
            .clone()
            .unwrap_or_else(|| out.with_extension("csv"));
        write_output(&csv_path, &report.to_csv()?)?;
    } else if let Some(csv_path) = &args.csv {
        write_output(csv_path, &report.to_csv()?)?;
    }
    print!("{}", report.summary_table());
    Ok(())
}

fn cmd_convergence(args: &ConvergenceArgs, verbose: bool) -> CliResult<()> {
    let suite = args.source.load()?;
    let seeds = parse_seeds(args.seeds.as_deref())?;
    let cfg = args.config.resolve(None, verbose)?;
    let started = Instant::now();
    let report = compare_convergence(&suite, &cfg, &seeds, args.workers)?;
    if verbose {
        eprintln!("{} pairs in {:.2?}", report.pairs, started.elapsed());
    }
    if let Some(out) = &args.out {
        write_output(out, &report.to_json())?;
    }
    print!("{}", report.summary());
    Ok(())
}

fn cmd_w1(args: &W1Args, verbose: bool) -> CliResult<()> {
    let p = Simplex::new(parse_vector(&args.p)?)?;
    let q = Simplex::new(parse_vector(&args.q)?)?;
    let metric = load_metric(&args.metric)?;
    let (cost, plan) = wasserstein1(&p, &q, &metric)?;
    let join = |xs: Vec<f64>| xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
    println!("w1 {cost}");
    println!("row_sums {}", join(plan.row_sums()));
    println!("col_sums {}", join(plan.col_sums()));
    if verbose {
        for row in plan.to_rows() {
            eprintln!("plan {}", join(row));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args, cli.verbose),
        Command::Eval(args) => cmd_eval(args, cli.verbose),
        Command::Convergence(args) => cmd_convergence(args, cli.verbose),
        Command::W1(args) => cmd_w1(args, cli.verbose),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
