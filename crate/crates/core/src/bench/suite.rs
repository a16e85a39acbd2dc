use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::{projected_gradient_solve, BaselineConfig};
use crate::driver::{solve, Budgets, SolveReport, SolveStatus, SolverConfig};
use crate::error::{Error, Result};
use crate::problem::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    AsaBcp,
    ProjectedGradient,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::AsaBcp => "asa-bcp",
            SolverKind::ProjectedGradient => "pg",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "asa-bcp" => Ok(SolverKind::AsaBcp),
            "pg" => Ok(SolverKind::ProjectedGradient),
            other => Err(format!("unknown solver '{other}' (expected asa-bcp or pg)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub max_fevals: u64,
    pub max_time: Option<Duration>,
    /// Worker threads; `None` uses every logical core.
    pub threads: Option<usize>,
    /// Problems whose converged solvers disagree on `f_final` by more than this
    /// (relative) are flagged as excluded.
    pub agreement_tol: f64,
    /// When set, problems every solver finishes faster than this are excluded.
    pub min_time_s: Option<f64>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            tol: crate::driver::DEFAULT_TOL,
            max_iters: 5_000,
            max_fevals: 50_000,
            max_time: None,
            threads: None,
            agreement_tol: 1e-3,
            min_time_s: None,
        }
    }
}

impl SuiteOptions {
    fn budgets(&self) -> Budgets {
        Budgets {
            max_iters: self.max_iters,
            max_fevals: self.max_fevals,
            max_time: self.max_time,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_iters: self.max_iters,
            max_fevals: self.max_fevals,
            max_time: self.max_time,
            ..SolverConfig::default()
        }
    }

    pub fn baseline_config(&self) -> BaselineConfig {
        BaselineConfig {
            tol: self.tol,
            budgets: self.budgets(),
            ..BaselineConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub problem: String,
    pub solver: String,
    pub status: SolveStatus,
    pub wall_time_s: f64,
    pub n_f: u64,
    pub n_g: u64,
    pub cg_iters: u64,
    pub f_final: f64,
    pub stationarity: f64,
    pub excluded: bool,
}

impl MetricsRow {
    pub fn from_report(report: &SolveReport) -> Self {
        Self {
            problem: report.problem.clone(),
            solver: report.solver.clone(),
            status: report.status,
            wall_time_s: report.wall_time_s,
            n_f: report.counters.n_f,
            n_g: report.counters.n_g,
            cg_iters: report.counters.cg_iters,
            f_final: report.f_final,
            stationarity: report.stationarity,
            excluded: false,
        }
    }

    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// One row per (problem, solver), in problem-major order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record([
                "problem",
                "solver",
                "status",
                "wall_time_s",
                "n_f",
                "n_g",
                "cg_iters",
                "f_final",
                "stationarity",
                "excluded",
            ])?;
        }
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<metrics>".into(),
            source,
        })
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let rows = r.deserialize().collect::<std::result::Result<Vec<MetricsRow>, _>>()?;
        Ok(Self { rows })
    }

    pub fn problems(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for row in &self.rows {
            if !out.contains(&row.problem.as_str()) {
                out.push(&row.problem);
            }
        }
        out
    }

    pub fn solvers(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for row in &self.rows {
            if !out.contains(&row.solver.as_str()) {
                out.push(&row.solver);
            }
        }
        out
    }

    pub fn get(&self, problem: &str, solver: &str) -> Option<&MetricsRow> {
        self.rows
            .iter()
            .find(|r| r.problem == problem && r.solver == solver)
    }

    /// Flags every row of a problem on which converged solvers reach different
    /// objective values, or which all solvers finish faster than `min_time_s`.
    pub fn apply_exclusions(&mut self, agreement_tol: f64, min_time_s: Option<f64>) {
        let problems: Vec<String> = self.problems().into_iter().map(String::from).collect();
        for p in problems {
            let rows: Vec<&MetricsRow> = self.rows.iter().filter(|r| r.problem == p).collect();
            let finals: Vec<f64> = rows.iter().filter(|r| r.converged()).map(|r| r.f_final).collect();
            let disagree = finals.iter().any(|&a| {
                finals
                    .iter()
                    .any(|&b| (a - b).abs() > agreement_tol * a.abs().max(b.abs()).max(1.0))
            });
            let too_fast = min_time_s.is_some_and(|t| {
                rows.iter().all(|r| r.converged() && r.wall_time_s < t)
            });
            if disagree || too_fast {
                for row in self.rows.iter_mut().filter(|r| r.problem == p) {
                    row.excluded = true;
                }
            }
        }
    }
}

fn run_one(kind: SolverKind, problem: &ProblemInstance, opts: &SuiteOptions) -> MetricsRow {
    let x0 = &problem.initial_point;
    let report = match kind {
        SolverKind::AsaBcp => solve(problem, &opts.solver_config(), x0),
        SolverKind::ProjectedGradient => projected_gradient_solve(problem, &opts.baseline_config(), x0),
    };
    match report {
        Ok(r) => MetricsRow::from_report(&r),
        Err(_) => MetricsRow {
            problem: problem.name.clone(),
            solver: kind.name().into(),
            status: SolveStatus::Diverged,
            wall_time_s: 0.0,
            n_f: 0,
            n_g: 0,
            cg_iters: 0,
            f_final: f64::NAN,
            stationarity: f64::NAN,
            excluded: false,
        },
    }
}

/// Runs every solver on every problem. Rows come back in (problem, solver)
/// order whatever order the workers finish in.
pub fn run_suite(
    solvers: &[SolverKind],
    problems: &[ProblemInstance],
    opts: &SuiteOptions,
) -> Result<MetricsTable> {
    if solvers.is_empty() || problems.is_empty() {
        return Err(Error::InvalidConfig(
            "suite needs at least one solver and one problem".into(),
        ));
    }
    opts.solver_config().validate()?;
    let jobs: Vec<(usize, usize)> = (0..problems.len())
        .flat_map(|p| (0..solvers.len()).map(move |s| (p, s)))
        .collect();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = opts.threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let rows: Vec<MetricsRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, s)| run_one(solvers[s], &problems[p], opts))
            .collect()
    });

    let mut table = MetricsTable { rows };
    table.apply_exclusions(opts.agreement_tol, opts.min_time_s);
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::builtin;

    fn row(problem: &str, solver: &str, status: SolveStatus, f: f64) -> MetricsRow {
        MetricsRow {
            problem: problem.into(),
            solver: solver.into(),
            status,
            wall_time_s: 0.1,
            n_f: 10,
            n_g: 10,
            cg_iters: 0,
            f_final: f,
            stationarity: 0.0,
            excluded: false,
        }
    }

    #[test]
    fn single_job_gives_single_row() {
        let p = builtin("sphere-shifted", 4, 1).unwrap();
        let t = run_suite(&[SolverKind::AsaBcp], &[p], &SuiteOptions::default()).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].status, SolveStatus::Converged);
    }

    #[test]
    fn disagreeing_problem_is_flagged() {
        let mut t = MetricsTable {
            rows: vec![
                row("p", "a", SolveStatus::Converged, -1.0),
                row("p", "b", SolveStatus::Converged, -1.5),
                row("q", "a", SolveStatus::Converged, 2.0),
                row("q", "b", SolveStatus::Converged, 2.0 + 1e-6),
            ],
        };
        t.apply_exclusions(1e-3, None);
        let flags: Vec<bool> = t.rows.iter().map(|r| r.excluded).collect();
        assert_eq!(flags, vec![true, true, false, false]);
    }

    #[test]
    fn failed_rows_do_not_trigger_exclusion() {
        let mut t = MetricsTable {
            rows: vec![
                row("p", "a", SolveStatus::Converged, -1.0),
                row("p", "b", SolveStatus::MaxIters, 40.0),
            ],
        };
        t.apply_exclusions(1e-3, None);
        assert!(t.rows.iter().all(|r| !r.excluded));
    }

    #[test]
    fn csv_round_trip() {
        let t = MetricsTable {
            rows: vec![
                row("p", "a", SolveStatus::Converged, -1.25),
                row("p", "b", SolveStatus::LineSearchFailure, 0.1 + 0.2),
            ],
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "problem,solver,status,wall_time_s,n_f,n_g,cg_iters,f_final,stationarity,excluded\n"
        ));
        assert_eq!(MetricsTable::read_csv(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn solver_names_parse() {
        assert_eq!("asa-bcp".parse::<SolverKind>().unwrap(), SolverKind::AsaBcp);
        assert_eq!("pg".parse::<SolverKind>().unwrap(), SolverKind::ProjectedGradient);
        assert!("lbfgsb".parse::<SolverKind>().is_err());
    }
}
