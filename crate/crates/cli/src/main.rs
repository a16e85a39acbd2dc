use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use asabcp_core::bench::{
    performance_profile, run_suite, write_profile_csv, MetricsTable, ProfileMetric, SolverKind,
    SuiteOptions,
};
use asabcp_core::driver::{write_trace_csv, TraceLevel, DEFAULT_MEMORY, DEFAULT_WATCHDOG};
use asabcp_core::problems::{builtin, default_suite, load_qp, REGISTRY};
use asabcp_core::{solve, Error, ProblemInstance, SolveStatus, SolverConfig};

const THREADS_ENV: &str = "ASABCP_THREADS";

#[derive(Debug, Parser)]
#[command(name = "asabcp", version, about = "Active-set solver for bound-constrained minimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one problem and print a summary line.
    Solve(SolveArgs),
    /// Run solvers over a problem suite and write a metrics CSV.
    Bench(BenchArgs),
    /// Build performance profiles from a metrics CSV.
    Profile(ProfileArgs),
    /// List the built-in problems.
    ListProblems,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Built-in problem name (see list-problems).
    #[arg(long, conflicts_with = "qp_file", required_unless_present = "qp_file")]
    problem: Option<String>,
    /// QP file in the `qp 1` text format.
    #[arg(long)]
    qp_file: Option<PathBuf>,
    /// Dimension of a built-in problem.
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Seed for built-in problem generation.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Stopping tolerance on the sup-norm of x - P(x - g).
    #[arg(long, default_value = "1e-5")]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    /// Watchdog length Z: iterations between forced objective checks.
    #[arg(long = "watchdog", value_name = "Z", default_value_t = DEFAULT_WATCHDOG)]
    watchdog: usize,
    /// Reference-value memory M of the non-monotone line search.
    #[arg(long = "memory", value_name = "M", default_value_t = DEFAULT_MEMORY)]
    memory: usize,
    /// Write the full report as JSON.
    #[arg(long, value_name = "OUT")]
    json: Option<PathBuf>,
    /// Write the per-iteration trace as CSV.
    #[arg(long, value_name = "CSV")]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Named suite; only `default` exists.
    #[arg(long, conflicts_with = "qp_dir", required_unless_present = "qp_dir")]
    suite: Option<String>,
    /// Directory of `.qp` files to use as the suite.
    #[arg(long)]
    qp_dir: Option<PathBuf>,
    /// Comma-separated solver list.
    #[arg(long, value_delimiter = ',', default_value = "asa-bcp,pg")]
    solvers: Vec<SolverKind>,
    #[arg(long, default_value = "1e-5")]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ProfileArgs {
    #[arg(long)]
    metrics: PathBuf,
    /// One of time, fevals, cg-iters.
    #[arg(long, default_value = "fevals")]
    metric: ProfileMetric,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", error_chain(&e));
            ExitCode::from(1)
        }
    }
}

/// Joins the error chain, skipping causes already quoted by their parent.
fn error_chain(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Solve(args) => solve_cmd(args),
        Command::Bench(args) => bench_cmd(args).map(|_| ExitCode::SUCCESS),
        Command::Profile(args) => profile_cmd(args).map(|_| ExitCode::SUCCESS),
        Command::ListProblems => {
            for e in REGISTRY {
                println!("{:<16} {}", e.name, e.description);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn load_file_problem(path: &Path) -> anyhow::Result<ProblemInstance> {
    load_qp(path).map_err(|e| match e {
        Error::Io { .. } => e.into(),
        other => anyhow::Error::from(other).context(path.display().to_string()),
    })
}

fn solve_cmd(args: SolveArgs) -> anyhow::Result<ExitCode> {
    let problem = match (&args.problem, &args.qp_file) {
        (Some(name), None) => builtin(name, args.n, args.seed)?,
        (None, Some(path)) => load_file_problem(path)?,
        _ => bail!("exactly one of --problem or --qp-file is required"),
    };
    let config = SolverConfig {
        tol: args.tol,
        max_iters: args.max_iters,
        watchdog: args.watchdog,
        memory: args.memory,
        trace: if args.trace.is_some() {
            TraceLevel::Iterations
        } else {
            TraceLevel::Off
        },
        ..SolverConfig::default()
    };
    let report = solve(&problem, &config, &problem.initial_point)?;

    if let Some(path) = &args.trace {
        let records = report.trace.as_deref().unwrap_or_default();
        write_trace_csv(records, create(path)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    if let Some(path) = &args.json {
        std::fs::write(path, report.to_json()?)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    println!(
        "{}: status={} f_final={:.10e} stationarity={:.3e} iters={} n_f={}",
        report.problem,
        report.status,
        report.f_final,
        report.stationarity,
        report.iterations,
        report.counters.n_f
    );
    Ok(if report.status == SolveStatus::Converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn threads_from_env() -> anyhow::Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let t: usize = v
                .trim()
                .parse()
                .with_context(|| format!("{THREADS_ENV} must be a positive integer, got '{v}'"))?;
            Ok(Some(t.max(1)))
        }
        Err(_) => Ok(None),
    }
}

fn bench_cmd(args: BenchArgs) -> anyhow::Result<()> {
    let problems = match (&args.suite, &args.qp_dir) {
        (Some(name), None) if name == "default" => default_suite()?,
        (Some(name), None) => bail!("unknown suite '{name}' for --suite (available: default)"),
        (None, Some(dir)) => {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
                .with_context(|| format!("cannot read {}", dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "qp"))
                .collect();
            paths.sort();
            if paths.is_empty() {
                bail!("no .qp files in {}", dir.display());
            }
            paths
                .iter()
                .map(|p| load_file_problem(p))
                .collect::<anyhow::Result<Vec<_>>>()?
        }
        _ => bail!("exactly one of --suite or --qp-dir is required"),
    };
    let opts = SuiteOptions {
        tol: args.tol,
        threads: threads_from_env()?,
        ..SuiteOptions::default()
    };
    eprintln!(
        "running {} solver(s) on {} problem(s)",
        args.solvers.len(),
        problems.len()
    );
    let table = run_suite(&args.solvers, &problems, &opts)?;
    table
        .write_csv(create(&args.out)?)
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    let converged = table.rows.iter().filter(|r| r.converged()).count();
    let excluded = table.rows.iter().filter(|r| r.excluded).count();
    println!(
        "bench: {} runs, {} converged, {} excluded, written to {}",
        table.rows.len(),
        converged,
        excluded,
        args.out.display()
    );
    Ok(())
}

fn profile_cmd(args: ProfileArgs) -> anyhow::Result<()> {
    let file = File::open(&args.metrics)
        .with_context(|| format!("cannot open {}", args.metrics.display()))?;
    let table = MetricsTable::read_csv(BufReader::new(file))
        .with_context(|| format!("cannot parse {}", args.metrics.display()))?;
    let profile = performance_profile(&table, args.metric)?;
    write_profile_csv(&profile.curves, create(&args.out)?)
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    if profile.dropped > 0 {
        eprintln!("{} problem(s) dropped: no solver converged", profile.dropped);
    }
    let summary: Vec<String> = profile
        .curves
        .iter()
        .map(|c| format!("{} rho(1)={:.3} rho(2)={:.3}", c.solver, c.rho_at(1.0), c.rho_at(2.0)))
        .collect();
    println!("profile over {} problems: {}", profile.n_problems, summary.join("; "));
    Ok(())
}
