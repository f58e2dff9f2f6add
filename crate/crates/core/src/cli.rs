//! Batch front end behind the `sbarrier` binary.
//!
//! Exit codes: 0 success, 1 parse/flag/input errors, 2 no certificate on
//! any grid point, 3 synthesis found no controller.
//!
//! Every command writes a CSV table (stdout unless `--output`), and
//! optionally a JSON-lines trace (`--trace`) and a JSON run report
//! (`--report`). CSV rows hold only deterministic values; timings live in
//! the trace and the report.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use sbarrier_sdp::Settings;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bounds::{BoundValue, Certificate};
use crate::engine::{
    synthesize, verify, EngineError, Grid, SynthesisConfig, TraceRecord, VerifyConfig,
};
use crate::model::{parse_problem, SafetyProblem, TimeDomain};
use crate::montecarlo::{self, McError, McEstimate, SimConfig};
use crate::presets;
use crate::sosprog::{Degrees, DEFAULT_MAX_DEGREE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NO_CONTROLLER: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    MonteCarlo(#[from] McError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Engine(EngineError::AllInfeasible { .. }) => EXIT_INFEASIBLE,
            CliError::Engine(EngineError::NoControllerFound { .. }) => EXIT_NO_CONTROLLER,
            _ => EXIT_INPUT,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sbarrier", version, about = "Stochastic barrier certificates: verify, synthesize, simulate, sweep")]
pub struct Cli {
    /// Base seed for Monte Carlo and sampling checks.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// SDP solver tolerance on residuals and gap.
    #[arg(long, global = true, default_value_t = Settings::default().tol)]
    pub tol: f64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify a failure-probability bound by a line search over the decay rate.
    Verify(VerifyArgs),
    /// Search for a polynomial controller meeting a probability goal.
    Synthesize(SynthArgs),
    /// Monte Carlo estimate of the failure probability.
    Simulate(SimArgs),
    /// Bound, decay-free baseline and Monte Carlo estimate over a sigma range.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Clone)]
pub struct Outputs {
    /// CSV destination (default: stdout).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// JSON-lines trace destination.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// JSON run report destination.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct BarrierArgs {
    /// Barrier degree.
    #[arg(long = "deg-b")]
    pub deg_b: Option<u32>,
    /// Multiplier degree (even); derived from the constraint degrees when omitted.
    #[arg(long = "deg-lambda")]
    pub deg_lambda: Option<u32>,
    /// Largest total degree of any SOS constraint.
    #[arg(long = "max-degree", default_value_t = DEFAULT_MAX_DEGREE)]
    pub max_degree: u32,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Problem file, or the name of a shipped preset.
    pub file: String,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[command(flatten)]
    pub barrier: BarrierArgs,
    /// Decay-rate grid `lo:step:hi`, or a single value.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Sampling soundness check with this many samples per condition.
    #[arg(long)]
    pub check: Option<usize>,
    #[command(flatten)]
    pub out: Outputs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub file: String,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Goal on the failure probability.
    #[arg(long)]
    pub pgoal: f64,
    /// Controller degree.
    #[arg(long = "deg-u", default_value_t = 2)]
    pub deg_u: u32,
    #[command(flatten)]
    pub barrier: BarrierArgs,
    /// Fixed decay rate (default 1 in continuous time, 2 in discrete time).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 0.02)]
    pub epsilon: f64,
    #[arg(long = "max-iter", default_value_t = 30)]
    pub max_iter: usize,
    #[command(flatten)]
    pub out: Outputs,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    pub file: String,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 5000)]
    pub trials: usize,
    /// Euler–Maruyama step (continuous time).
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Start point `a,b,...` (default: the file's initial point).
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    #[command(flatten)]
    pub out: Outputs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub file: String,
    /// Sigma range `lo:step:hi`, or a comma-separated list.
    #[arg(long)]
    pub sigmas: String,
    #[command(flatten)]
    pub barrier: BarrierArgs,
    #[arg(long)]
    pub alpha: Option<String>,
    /// Monte Carlo trials per sigma; 0 skips simulation.
    #[arg(long, default_value_t = 5000)]
    pub trials: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    #[command(flatten)]
    pub out: Outputs,
}

/// Parses `args` (including the program name), runs, and returns the exit
/// code. Diagnostics go to stderr.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let echo: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match run(&cli, &echo) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli, echo: &[String]) -> Result<i32, CliError> {
    let go = || match &cli.command {
        Command::Verify(a) => cmd_verify(cli, a, echo),
        Command::Synthesize(a) => cmd_synthesize(cli, a, echo),
        Command::Simulate(a) => cmd_simulate(cli, a, echo),
        Command::Sweep(a) => cmd_sweep(cli, a, echo),
    };
    match cli.threads {
        Some(0) => Err(CliError::Input("--threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Input(format!("thread pool: {e}")))?
            .install(go),
        None => go(),
    }
}

/// Reads a problem from `file`, falling back to a shipped preset of the
/// same stem (so `presets/ct-1d.prob` works from any directory).
pub fn load_problem(file: &str) -> Result<SafetyProblem, CliError> {
    let path = Path::new(file);
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(file);
            match presets::source(stem) {
                Some(src) if e.kind() == io::ErrorKind::NotFound => src.to_string(),
                _ => return Err(CliError::Input(format!("cannot read {file}: {e}"))),
            }
        }
    };
    parse_problem(&text).map_err(|e| CliError::Input(format!("{file}: {e}")))
}

fn bind(problem: &SafetyProblem, sigma: Option<f64>) -> Result<SafetyProblem, CliError> {
    problem.bind_sigma(sigma).map_err(|e| CliError::Input(e.to_string()))
}

/// `lo:step:hi` into an inclusive list.
pub fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Input(format!("expected lo:step:hi or a comma-separated list, got `{s}`"));
    let nums = |parts: &[&str]| -> Result<Vec<f64>, CliError> {
        parts.iter().map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect()
    };
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, step, hi] = nums(&parts)?[..] else { return Err(bad()) };
        Ok(Grid::new(lo, hi, step).map_err(|e| CliError::Input(e.to_string()))?.points())
    } else if s.trim().is_empty() {
        Ok(Vec::new())
    } else {
        nums(&s.split(',').collect::<Vec<_>>())
    }
}

fn parse_grid(s: Option<&str>, time: TimeDomain) -> Result<Grid, CliError> {
    let Some(s) = s else { return Ok(Grid::default_for(time)) };
    let err = |e: EngineError| CliError::Input(e.to_string());
    if s.contains(':') {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Input(format!("bad alpha grid `{s}`")))?;
        let [lo, step, hi] = parts[..] else { return Err(CliError::Input(format!("bad alpha grid `{s}`"))) };
        Grid::new(lo, hi, step).map_err(err)
    } else {
        let a = s.trim().parse::<f64>().map_err(|_| CliError::Input(format!("bad alpha `{s}`")))?;
        Ok(Grid::single(a))
    }
}

fn parse_point(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| CliError::Input(format!("bad point `{s}`"))))
        .collect()
}

fn start_point(problem: &SafetyProblem, x0: Option<&str>) -> Result<Vec<f64>, CliError> {
    match x0 {
        Some(s) => parse_point(s),
        None => problem
            .initial_point
            .clone()
            .ok_or_else(|| CliError::Input("no x0: pass --x0 or add [initial-point] to the file".into())),
    }
}

fn verify_config(cli: &Cli, b: &BarrierArgs, grid: Grid, default_deg: u32) -> Result<VerifyConfig, CliError> {
    if !(cli.tol > 0.0) {
        return Err(CliError::Input("--tol must be positive".into()));
    }
    let degrees = Degrees { barrier: b.deg_b.unwrap_or(default_deg), multiplier: b.deg_lambda, max: b.max_degree };
    Ok(VerifyConfig { grid, degrees, settings: Settings { tol: cli.tol, ..Settings::default() }, gamma_max: None })
}

fn sim_config(cli: &Cli, trials: usize, dt: f64) -> Result<SimConfig, CliError> {
    if trials == 0 {
        return Err(CliError::Input("--trials must be >= 1".into()));
    }
    Ok(SimConfig { trials, dt, seed: cli.seed, confidence: 0.99 })
}

/// Writes CSV rows to `path` or stdout.
fn write_csv<R: Serialize>(path: Option<&Path>, header: &[&str], rows: &[R]) -> Result<(), CliError> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(header).map_err(|e| CliError::Io(e.into()))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TraceLine<'a> {
    sigma: Option<f64>,
    #[serde(flatten)]
    record: &'a TraceRecord,
}

fn write_trace(path: Option<&Path>, lines: &[(Option<f64>, &TraceRecord)]) -> Result<(), CliError> {
    let Some(path) = path else { return Ok(()) };
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    for &(sigma, record) in lines {
        serde_json::to_writer(&mut f, &TraceLine { sigma, record }).map_err(io::Error::from)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

/// Echoed command, configuration and its hash, result rows and timing.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    pub config: serde_json::Value,
    /// SHA-256 of the compact JSON encoding of `config`.
    pub config_hash: String,
    pub rng: &'static str,
    pub rows: Vec<serde_json::Value>,
    pub wall_ms: f64,
}

impl RunReport {
    pub fn new(command: &[String], config: serde_json::Value, rows: Vec<serde_json::Value>, wall_ms: f64) -> Self {
        RunReport {
            tool: "sbarrier",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_vec(),
            config_hash: config_hash(&config),
            config,
            rng: montecarlo::RNG_ALGORITHM,
            rows,
            wall_ms,
        }
    }
}

pub fn config_hash(config: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(config).expect("json values always serialize");
    hex::encode(Sha256::digest(bytes))
}

fn write_report(path: Option<&Path>, report: &RunReport) -> Result<(), CliError> {
    if let Some(p) = path {
        let text = serde_json::to_string_pretty(report).map_err(io::Error::from)?;
        fs::write(p, text + "\n")?;
    }
    Ok(())
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn problem_json(file: &str, problem: &SafetyProblem) -> serde_json::Value {
    json!({ "file": file, "problem": problem.to_file_string() })
}

#[derive(Debug, Clone, Serialize)]
struct BoundRow {
    sigma: Option<f64>,
    alpha: f64,
    beta: f64,
    gamma: f64,
    branch: String,
    bound: f64,
    raw_bound: f64,
    trivial: bool,
    pointwise: bool,
    solved: usize,
    points: usize,
}

fn bound_row(sigma: Option<f64>, c: &Certificate, solved: usize, points: usize) -> BoundRow {
    let b: BoundValue = c.reported();
    BoundRow {
        sigma,
        alpha: c.alpha,
        beta: c.beta,
        gamma: c.gamma,
        branch: b.branch.to_string(),
        bound: b.value,
        raw_bound: b.raw,
        trivial: b.trivial,
        pointwise: c.pointwise.is_some(),
        solved,
        points,
    }
}

const VERIFY_HEADER: [&str; 11] =
    ["sigma", "alpha", "beta", "gamma", "branch", "bound", "raw_bound", "trivial", "pointwise", "solved", "points"];

fn cmd_verify(cli: &Cli, a: &VerifyArgs, echo: &[String]) -> Result<i32, CliError> {
    let t0 = Instant::now();
    let template = load_problem(&a.file)?;
    let problem = bind(&template, a.sigma)?;
    let sigma = a.sigma.or(template.sigma_default);
    let grid = parse_grid(a.alpha.as_deref(), problem.time())?;
    let cfg = verify_config(cli, &a.barrier, grid, 8)?;
    let v = verify(&problem, &cfg)?;
    let row = bound_row(sigma, &v.certificate, v.solved, v.trace.len());
    write_csv(a.out.output.as_deref(), &VERIFY_HEADER, std::slice::from_ref(&row))?;
    let lines: Vec<_> = v.trace.iter().map(|r| (sigma, r)).collect();
    write_trace(a.out.trace.as_deref(), &lines)?;
    let mut extra = json!({ "barrier": v.certificate.barrier.to_string() });
    if let Some(n) = a.check {
        let s = v.soundness(&problem, n, cli.seed).map_err(EngineError::from)?;
        eprintln!("soundness ({n} samples per condition): {}", if s.passed() { "pass" } else { "FAIL" });
        for c in &s.checks {
            eprintln!("  {:<9} worst slack {:+.3e} over {} samples", c.name, c.worst, c.samples);
        }
        extra["soundness"] = serde_json::to_value(&s).map_err(io::Error::from)?;
    }
    eprintln!(
        "bound {:.6} ({}, alpha {}, {} of {} grid points solved)",
        row.bound, row.branch, row.alpha, row.solved, row.points
    );
    let config = json!({
        "command": "verify",
        "input": problem_json(&a.file, &problem),
        "sigma": sigma,
        "grid": cfg.grid,
        "degrees": { "barrier": cfg.degrees.barrier, "multiplier": cfg.degrees.multiplier, "max": cfg.degrees.max },
        "tol": cli.tol,
        "seed": cli.seed,
    });
    let mut row_json = serde_json::to_value(&row).map_err(io::Error::from)?;
    row_json["details"] = extra;
    write_report(a.out.report.as_deref(), &RunReport::new(echo, config, vec![row_json], ms(t0)))?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct SynthRow {
    sigma: Option<f64>,
    alpha: f64,
    p_goal: f64,
    c: f64,
    bound: f64,
    beta: f64,
    gamma: f64,
    branch: String,
    iterations: usize,
    controller: String,
}

fn cmd_synthesize(cli: &Cli, a: &SynthArgs, echo: &[String]) -> Result<i32, CliError> {
    let t0 = Instant::now();
    let template = load_problem(&a.file)?;
    let problem = bind(&template, a.sigma)?;
    let sigma = a.sigma.or(template.sigma_default);
    let (default_alpha, default_deg) = match problem.time() {
        TimeDomain::Continuous => (1.0, 8),
        TimeDomain::Discrete => (2.0, 1),
    };
    let alpha = a.alpha.unwrap_or(default_alpha);
    let vcfg = verify_config(cli, &a.barrier, Grid::single(alpha), default_deg)?;
    let mut scfg = SynthesisConfig::new(a.pgoal, alpha, a.deg_u);
    scfg.epsilon = a.epsilon;
    scfg.max_iterations = a.max_iter;
    let config = json!({
        "command": "synthesize",
        "input": problem_json(&a.file, &problem),
        "sigma": sigma,
        "synthesis": scfg,
        "degrees": { "barrier": vcfg.degrees.barrier, "multiplier": vcfg.degrees.multiplier, "max": vcfg.degrees.max },
        "tol": cli.tol,
    });
    let result = match synthesize(&problem, &scfg, &vcfg) {
        Ok(r) => r,
        Err(EngineError::NoControllerFound { iterations, best_bound, trace }) => {
            let lines: Vec<_> = trace.iter().map(|r| (sigma, r)).collect();
            write_trace(a.out.trace.as_deref(), &lines)?;
            write_report(a.out.report.as_deref(), &RunReport::new(echo, config, Vec::new(), ms(t0)))?;
            return Err(EngineError::NoControllerFound { iterations, best_bound, trace: Vec::new() }.into());
        }
        Err(e) => return Err(e.into()),
    };
    let b = result.certificate.reported();
    let row = SynthRow {
        sigma,
        alpha,
        p_goal: a.pgoal,
        c: result.c,
        bound: b.value,
        beta: result.certificate.beta,
        gamma: result.certificate.gamma,
        branch: b.branch.to_string(),
        iterations: result.iterations,
        controller: result.controller.iter().map(|u| u.to_string()).collect::<Vec<_>>().join("; "),
    };
    write_csv(
        a.out.output.as_deref(),
        &["sigma", "alpha", "p_goal", "c", "bound", "beta", "gamma", "branch", "iterations", "controller"],
        std::slice::from_ref(&row),
    )?;
    let lines: Vec<_> = result.trace.iter().map(|r| (sigma, r)).collect();
    write_trace(a.out.trace.as_deref(), &lines)?;
    eprintln!("c* {:.6}, bound {:.6} after {} iterations", row.c, row.bound, row.iterations);
    let mut row_json = serde_json::to_value(&row).map_err(io::Error::from)?;
    row_json["barrier"] = json!(result.certificate.barrier.to_string());
    write_report(a.out.report.as_deref(), &RunReport::new(echo, config, vec![row_json], ms(t0)))?;
    Ok(EXIT_OK)
}

fn cmd_simulate(cli: &Cli, a: &SimArgs, echo: &[String]) -> Result<i32, CliError> {
    let t0 = Instant::now();
    let template = load_problem(&a.file)?;
    let problem = bind(&template, a.sigma)?;
    let sigma = a.sigma.or(template.sigma_default);
    let x0 = start_point(&problem, a.x0.as_deref())?;
    let cfg = sim_config(cli, a.trials, a.dt)?;
    let e = montecarlo::simulate(&problem, &x0, &cfg)?;
    let rows = [(sigma.unwrap_or(f64::NAN), e)];
    match a.out.output.as_deref() {
        Some(p) => montecarlo::write_csv(fs::File::create(p)?, &rows)?,
        None => montecarlo::write_csv(io::stdout().lock(), &rows)?,
    }
    eprintln!("{} failures in {} trials: {:.4} [{:.4}, {:.4}]", e.failures, e.trials, e.estimate, e.ci_low, e.ci_high);
    let config = json!({
        "command": "simulate",
        "input": problem_json(&a.file, &problem),
        "sigma": sigma,
        "x0": x0,
        "sim": cfg,
    });
    let row = serde_json::to_value(e).map_err(io::Error::from)?;
    write_report(a.out.report.as_deref(), &RunReport::new(echo, config, vec![row], ms(t0)))?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    sigma: f64,
    alpha: Option<f64>,
    beta: Option<f64>,
    gamma: Option<f64>,
    branch: Option<String>,
    bound: Option<f64>,
    baseline_alpha: f64,
    baseline_branch: Option<String>,
    baseline_bound: Option<f64>,
    trials: Option<usize>,
    failures: Option<usize>,
    mc_estimate: Option<f64>,
    mc_ci_low: Option<f64>,
    mc_ci_high: Option<f64>,
    seed: Option<u64>,
}

const SWEEP_HEADER: [&str; 15] = [
    "sigma",
    "alpha",
    "beta",
    "gamma",
    "branch",
    "bound",
    "baseline_alpha",
    "baseline_branch",
    "baseline_bound",
    "trials",
    "failures",
    "mc_estimate",
    "mc_ci_low",
    "mc_ci_high",
    "seed",
];

struct SweepPoint {
    row: SweepRow,
    trace: Vec<TraceRecord>,
    infeasible: bool,
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs, echo: &[String]) -> Result<i32, CliError> {
    let t0 = Instant::now();
    let template = load_problem(&a.file)?;
    let sigmas = parse_range(&a.sigmas)?;
    let time = template.time();
    let grid = parse_grid(a.alpha.as_deref(), time)?;
    // The decay-free baseline: alpha = 0, or alpha~ = 1 in discrete time.
    let base_alpha = match time {
        TimeDomain::Continuous => 0.0,
        TimeDomain::Discrete => 1.0,
    };
    let cfg = verify_config(cli, &a.barrier, grid, 8)?;
    let base_cfg = VerifyConfig { grid: Grid::single(base_alpha), ..cfg };
    let sim = if a.trials > 0 { Some(sim_config(cli, a.trials, a.dt)?) } else { None };
    let x0 = match sim {
        Some(_) => Some(start_point(&template, a.x0.as_deref())?),
        None => None,
    };
    let points: Vec<Result<SweepPoint, CliError>> = sigmas
        .par_iter()
        .enumerate()
        .map(|(i, &sigma)| {
            let problem = template.with_sigma(sigma);
            let mut trace = Vec::new();
            let mut row = SweepRow {
                sigma,
                alpha: None,
                beta: None,
                gamma: None,
                branch: None,
                bound: None,
                baseline_alpha: base_alpha,
                baseline_branch: None,
                baseline_bound: None,
                trials: None,
                failures: None,
                mc_estimate: None,
                mc_ci_low: None,
                mc_ci_high: None,
                seed: None,
            };
            let mut infeasible = false;
            match verify(&problem, &cfg) {
                Ok(v) => {
                    let b = v.certificate.reported();
                    row.alpha = Some(v.certificate.alpha);
                    row.beta = Some(v.certificate.beta);
                    row.gamma = Some(v.certificate.gamma);
                    row.branch = Some(b.branch.to_string());
                    row.bound = Some(b.value);
                    trace.extend(v.trace);
                }
                Err(EngineError::AllInfeasible { .. }) => infeasible = true,
                Err(e) => return Err(e.into()),
            }
            match verify(&problem, &base_cfg) {
                Ok(v) => {
                    let b = v.certificate.reported();
                    row.baseline_branch = Some(b.branch.to_string());
                    row.baseline_bound = Some(b.value);
                    trace.extend(v.trace.into_iter().map(|mut r| {
                        r.stage = "baseline".into();
                        r
                    }));
                }
                Err(EngineError::AllInfeasible { .. }) => {}
                Err(e) => return Err(e.into()),
            }
            if let (Some(sim), Some(x0)) = (sim, &x0) {
                let c = SimConfig { seed: montecarlo::sweep_seed(sim.seed, i), ..sim };
                let e: McEstimate = montecarlo::simulate(&problem, x0, &c)?;
                row.trials = Some(e.trials);
                row.failures = Some(e.failures);
                row.mc_estimate = Some(e.estimate);
                row.mc_ci_low = Some(e.ci_low);
                row.mc_ci_high = Some(e.ci_high);
                row.seed = Some(e.seed);
            }
            Ok(SweepPoint { row, trace, infeasible })
        })
        .collect();
    let points: Vec<SweepPoint> = points.into_iter().collect::<Result<_, _>>()?;
    let rows: Vec<SweepRow> = points.iter().map(|p| p.row.clone()).collect();
    write_csv(a.out.output.as_deref(), &SWEEP_HEADER, &rows)?;
    let lines: Vec<_> = points.iter().flat_map(|p| p.trace.iter().map(move |r| (Some(p.row.sigma), r))).collect();
    write_trace(a.out.trace.as_deref(), &lines)?;
    let config = json!({
        "command": "sweep",
        "input": problem_json(&a.file, &template),
        "sigmas": sigmas,
        "grid": cfg.grid,
        "baseline_alpha": base_alpha,
        "degrees": { "barrier": cfg.degrees.barrier, "multiplier": cfg.degrees.multiplier, "max": cfg.degrees.max },
        "tol": cli.tol,
        "sim": sim,
        "x0": x0,
    });
    let json_rows = rows.iter().map(|r| serde_json::to_value(r).map_err(io::Error::from)).collect::<Result<_, _>>()?;
    write_report(a.out.report.as_deref(), &RunReport::new(echo, config, json_rows, ms(t0)))?;
    if !points.is_empty() && points.iter().all(|p| p.infeasible) {
        return Err(EngineError::AllInfeasible { tried: points.len(), last: "every sigma".into() }.into());
    }
    Ok(EXIT_OK)
}
