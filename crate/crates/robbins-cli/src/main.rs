//! `robbins` — evaluate, simulate, optimize, and sweep rank-threshold
//! stopping rules on the planar Poisson strip.
//!
//! Single runs print one JSON report to stdout; `sweep` writes CSV. Exit
//! codes: 0 success, 1 runtime or numerical failure, 2 usage error.

use clap::{Args, Parser, Subcommand};
use robbins::{
    expected_rank, mc_estimate_with_mode, optimize_rule, LossMode, MCEstimate, OptConfig,
    OptResult, QuadConfig, RiskBreakdown, RuleParams, SimConfig,
};
use serde::Serialize;
use std::fmt;
use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "robbins",
    version,
    about = "Expected-rank laboratory for rank-threshold stopping rules on a planar Poisson strip",
    long_about = "Evaluates the expected absolute rank of a combined rank/threshold stopping rule \
                  (stop below b/(1-t) with relative rank one before time alpha, below c/(1-t) after), \
                  checks it by reproducible Monte Carlo simulation, and optimizes the rule parameters. \
                  Single runs emit one JSON report on stdout; sweeps emit CSV."
)]
struct Cli {
    /// Worker threads for simulation and grid scans (default: all cores).
    /// Results are independent of the thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the expected rank analytically by nested adaptive quadrature
    Eval(EvalArgs),
    /// Estimate the expected rank by seeded Monte Carlo simulation
    Simulate(SimulateArgs),
    /// Minimize the expected rank over the rule parameters
    Optimize(OptimizeArgs),
    /// Evaluate the expected rank over a parameter grid and write CSV
    Sweep(SweepArgs),
}

#[derive(Args)]
struct ParamArgs {
    /// Switch time of the rule, in [0, 1)
    #[arg(long)]
    alpha: f64,
    /// Rank-phase threshold coefficient (f1(t) = b/(1-t)); unused at alpha = 0
    #[arg(long, default_value_t = 2.0)]
    b: f64,
    /// Threshold-phase coefficient (f2(t) = c/(1-t)), must exceed 1
    #[arg(long)]
    c: f64,
}

impl ParamArgs {
    fn build(&self) -> Result<RuleParams, CliError> {
        RuleParams::new(self.alpha, self.b, self.c).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Args)]
struct QuadArgs {
    /// Absolute tolerance of the inner quadratures (outer integrals relax both
    /// tolerances by a factor of 100)
    #[arg(long, default_value_t = 1e-10)]
    abs_tol: f64,
    /// Relative tolerance of the inner quadratures
    #[arg(long, default_value_t = 1e-10)]
    rel_tol: f64,
    /// Subdivision budget per adaptive integral
    #[arg(long, default_value_t = 2000)]
    max_subdivisions: usize,
}

impl QuadArgs {
    fn build(&self) -> Result<QuadConfig, CliError> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) || self.max_subdivisions == 0 {
            return Err(CliError::Usage(
                "tolerances must be positive and --max-subdivisions at least 1".into(),
            ));
        }
        Ok(QuadConfig {
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            max_subdivisions: self.max_subdivisions,
        })
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    quad: QuadArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Number of independent process realizations
    #[arg(long, default_value_t = 500_000)]
    replicates: u64,
    /// Master seed; replicate i runs on a stream derived from (seed, i)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Vertical truncation of the strip
    #[arg(long, default_value_t = 200.0)]
    x_max: f64,
    /// Estimate with the raw absolute rank instead of the variance-reduced loss
    #[arg(long)]
    raw_rank: bool,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Starting point for the search
    #[arg(long, default_value_t = 0.4)]
    start_alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    start_b: f64,
    #[arg(long, default_value_t = 2.0)]
    start_c: f64,
    /// Pin alpha to this value; 0 optimizes the pure threshold coefficient only
    #[arg(long)]
    fix_alpha: Option<f64>,
    /// Initial simplex edge length
    #[arg(long, default_value_t = 0.05)]
    simplex_scale: f64,
    /// Convergence threshold on the simplex value spread
    #[arg(long, default_value_t = 1e-6)]
    f_tol: f64,
    /// Convergence threshold on the simplex diameter
    #[arg(long, default_value_t = 1e-5)]
    x_tol: f64,
    /// Objective evaluation budget (start point and grid scan included)
    #[arg(long, default_value_t = 2000)]
    max_evals: usize,
    /// Scan a coarse parameter grid before the simplex iteration
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    grid_refine: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Grid for alpha: a value, a comma list, or lo:hi:n
    #[arg(long, default_value = "0.34328")]
    alpha: String,
    /// Grid for b
    #[arg(long, default_value = "1.82571")]
    b: String,
    /// Grid for c
    #[arg(long, default_value = "2.0")]
    c: String,
    /// Output CSV path; - writes to stdout
    #[arg(long, default_value = "-")]
    output: String,
    #[command(flatten)]
    quad: QuadArgs,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

/// Envelope printed as one JSON document per invocation. Optional sections
/// are omitted, never null.
#[derive(Serialize)]
struct RunReport {
    command: &'static str,
    params: RuleParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    analytic: Option<RiskBreakdown>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mc: Option<MCEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    opt: Option<OptSummary>,
    wall_time_s: f64,
    tool_version: &'static str,
}

impl RunReport {
    fn new(command: &'static str, params: RuleParams) -> Self {
        Self {
            command,
            params,
            analytic: None,
            mc: None,
            opt: None,
            wall_time_s: 0.0,
            tool_version: env!("CARGO_PKG_VERSION"),
        }
    }

    fn print(&self) {
        println!(
            "{}",
            serde_json::to_string_pretty(self).expect("report serializes")
        );
    }
}

#[derive(Serialize)]
struct OptSummary {
    best: RuleParams,
    value: f64,
    evals: usize,
    converged: bool,
    trace_len: usize,
}

impl From<&OptResult> for OptSummary {
    fn from(r: &OptResult) -> Self {
        Self {
            best: r.best,
            value: r.value,
            evals: r.evals,
            converged: r.converged,
            trace_len: r.trace.len(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        // Ignore failure: the global pool can only be configured once.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Eval(args) => cmd_eval(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Optimize(args) => cmd_optimize(args),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

fn cmd_eval(args: EvalArgs) -> Result<ExitCode, CliError> {
    let params = args.params.build()?;
    let quad = args.quad.build()?;
    let started = Instant::now();
    let breakdown =
        expected_rank(&params, &quad).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut report = RunReport::new("eval", params);
    report.analytic = Some(breakdown);
    report.wall_time_s = started.elapsed().as_secs_f64();
    report.print();
    if breakdown.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: quadrature exhausted its subdivision budget; result flagged non-converged");
        Ok(ExitCode::from(1))
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode, CliError> {
    let params = args.params.build()?;
    if args.replicates == 0 {
        return Err(CliError::Usage("--replicates must be at least 1".into()));
    }
    let cfg = SimConfig {
        x_max: args.x_max,
        seed: args.seed,
        replicates: args.replicates,
    };
    let mode = if args.raw_rank {
        LossMode::RawRank
    } else {
        LossMode::VarianceReduced
    };
    let started = Instant::now();
    let estimate = mc_estimate_with_mode(&params, &cfg, mode).map_err(|e| match e {
        robbins::SimError::NoReplicates | robbins::SimError::TruncationBelowThreshold { .. } => {
            CliError::Usage(e.to_string())
        }
        _ => CliError::Runtime(e.to_string()),
    })?;
    if estimate.censoring_excessive() {
        eprintln!(
            "warning: censored fraction {:.2e} exceeds 1e-3; increase --x-max",
            estimate.censored_fraction()
        );
    }
    let mut report = RunReport::new("simulate", params);
    report.mc = Some(estimate);
    report.wall_time_s = started.elapsed().as_secs_f64();
    report.print();
    Ok(ExitCode::SUCCESS)
}

fn cmd_optimize(args: OptimizeArgs) -> Result<ExitCode, CliError> {
    let start = RuleParams::new(args.start_alpha, args.start_b, args.start_c)
        .map_err(|e| CliError::Usage(format!("invalid start point: {e}")))?;
    if let Some(a) = args.fix_alpha {
        if !(0.0..1.0).contains(&a) {
            return Err(CliError::Usage(format!(
                "--fix-alpha must lie in [0, 1), got {a}"
            )));
        }
    }
    if args.max_evals == 0 {
        return Err(CliError::Usage("--max-evals must be at least 1".into()));
    }
    let cfg = OptConfig {
        start,
        simplex_scale: args.simplex_scale,
        f_tol: args.f_tol,
        x_tol: args.x_tol,
        max_evals: args.max_evals,
        grid_refine: args.grid_refine,
        fixed_alpha: args.fix_alpha,
    };
    let started = Instant::now();
    let result = optimize_rule(&cfg);
    if !result.converged {
        eprintln!("warning: simplex did not meet the convergence tolerances; best point so far reported");
    }
    let mut report = RunReport::new("optimize", start);
    report.opt = Some(OptSummary::from(&result));
    report.wall_time_s = started.elapsed().as_secs_f64();
    report.print();
    // A non-converged search still carries a useful best-so-far result.
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode, CliError> {
    let quad = args.quad.build()?;
    let alphas = parse_grid("alpha", &args.alpha)?;
    let bs = parse_grid("b", &args.b)?;
    let cs = parse_grid("c", &args.c)?;

    let mut grid = Vec::with_capacity(alphas.len() * bs.len() * cs.len());
    for &alpha in &alphas {
        for &b in &bs {
            for &c in &cs {
                grid.push(
                    RuleParams::new(alpha, b, c)
                        .map_err(|e| CliError::Usage(format!("sweep point rejected: {e}")))?,
                );
            }
        }
    }

    use rayon::prelude::*;
    let rows: Vec<Result<(RuleParams, RiskBreakdown), String>> = grid
        .par_iter()
        .map(|p| {
            expected_rank(p, &quad)
                .map(|r| (*p, r))
                .map_err(|e| e.to_string())
        })
        .collect();

    let mut out: Box<dyn Write> = if args.output == "-" {
        Box::new(std::io::stdout().lock())
    } else {
        Box::new(
            std::fs::File::create(&args.output)
                .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", args.output)))?,
        )
    };
    let emit = |out: &mut dyn Write| -> std::io::Result<()> {
        out.write_all(b"alpha,b,c,expected_rank,quad_error\n")?;
        for row in &rows {
            let (p, r) = match row {
                Ok(pair) => pair,
                Err(msg) => {
                    return Err(std::io::Error::other(msg.clone()));
                }
            };
            writeln!(
                out,
                "{},{},{},{},{}",
                sig10(p.alpha()),
                sig10(p.b()),
                sig10(p.c()),
                sig10(r.total),
                sig10(r.quad_error)
            )?;
        }
        Ok(())
    };
    emit(&mut *out).map_err(|e| CliError::Runtime(format!("sweep failed: {e}")))?;
    Ok(ExitCode::SUCCESS)
}

/// Ten significant digits, plain decimal-point notation.
fn sig10(v: f64) -> String {
    format!("{v:.9e}")
}

/// Parse a grid spec: a single value, a comma list, or an inclusive
/// `lo:hi:n` range with n evenly spaced points.
fn parse_grid(name: &str, spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = |msg: String| CliError::Usage(format!("--{name}: {msg}"));
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(format!("range must be lo:hi:n, got {spec}")));
        }
        let lo: f64 = parts[0]
            .parse()
            .map_err(|_| bad(format!("bad range start {}", parts[0])))?;
        let hi: f64 = parts[1]
            .parse()
            .map_err(|_| bad(format!("bad range end {}", parts[1])))?;
        let n: usize = parts[2]
            .parse()
            .map_err(|_| bad(format!("bad point count {}", parts[2])))?;
        if n < 2 || hi <= lo {
            return Err(bad("range needs hi > lo and at least 2 points".into()));
        }
        Ok((0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect())
    } else {
        spec.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("bad value {s}")))
            })
            .collect()
    }
}
