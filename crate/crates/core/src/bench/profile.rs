//! Dolan–Moré performance profiles.
//!
//! For problem `p` and solver `s`, `r_{p,s} = cost_{p,s} / min_s cost_{p,s}`
//! and `rho_s(tau) = |{p : r_{p,s} <= tau}| / |P|`. Failed runs cost `+inf`.

use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use super::suite::{MetricsRow, MetricsTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileMetric {
    Time,
    Fevals,
    CgIters,
}

impl ProfileMetric {
    /// Cost of a row; `+inf` unless it converged. Zero costs are floored so
    /// ratios stay defined.
    pub fn cost(&self, row: &MetricsRow) -> f64 {
        if !row.converged() {
            return f64::INFINITY;
        }
        match self {
            ProfileMetric::Time => row.wall_time_s.max(1e-9),
            ProfileMetric::Fevals => (row.n_f as f64).max(1.0),
            ProfileMetric::CgIters => (row.cg_iters as f64).max(1.0),
        }
    }
}

impl FromStr for ProfileMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "time" => Ok(ProfileMetric::Time),
            "fevals" => Ok(ProfileMetric::Fevals),
            "cg-iters" => Ok(ProfileMetric::CgIters),
            other => Err(format!("unknown metric '{other}' (expected time, fevals or cg-iters)")),
        }
    }
}

/// Right-continuous step function `tau -> rho(tau)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve {
    pub solver: String,
    /// `(tau, rho)` sorted by `tau`.
    pub breakpoints: Vec<(f64, f64)>,
}

impl ProfileCurve {
    pub fn rho_at(&self, tau: f64) -> f64 {
        self.breakpoints
            .iter()
            .take_while(|(t, _)| *t <= tau)
            .last()
            .map_or(0.0, |&(_, rho)| rho)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub curves: Vec<ProfileCurve>,
    /// Problems kept for the profile.
    pub n_problems: usize,
    /// Problems dropped because no solver succeeded on them.
    pub dropped: usize,
}

pub fn performance_profile(table: &MetricsTable, metric: ProfileMetric) -> Result<Profile> {
    let solvers = table.solvers();
    let mut ratios: Vec<Vec<f64>> = vec![Vec::new(); solvers.len()];
    let mut kept = 0;
    let mut dropped = 0;
    for problem in table.problems() {
        let costs: Vec<f64> = solvers
            .iter()
            .map(|s| match table.get(problem, s) {
                Some(row) if !row.excluded => Some(metric.cost(row)),
                Some(_) => None,
                None => Some(f64::INFINITY),
            })
            .collect::<Option<Vec<f64>>>()
            .unwrap_or_default();
        if costs.is_empty() {
            continue;
        }
        let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            dropped += 1;
            continue;
        }
        kept += 1;
        for (s, c) in costs.iter().enumerate() {
            ratios[s].push(c / best);
        }
    }
    if kept == 0 {
        return Err(Error::EmptyTable);
    }

    let mut taus: Vec<f64> = ratios
        .iter()
        .flatten()
        .copied()
        .filter(|r| r.is_finite())
        .collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();

    let curves = solvers
        .iter()
        .zip(&ratios)
        .map(|(name, rs)| ProfileCurve {
            solver: name.to_string(),
            breakpoints: taus
                .iter()
                .map(|&tau| {
                    let hits = rs.iter().filter(|&&r| r <= tau).count();
                    (tau, hits as f64 / kept as f64)
                })
                .collect(),
        })
        .collect();
    Ok(Profile {
        curves,
        n_problems: kept,
        dropped,
    })
}

#[derive(Serialize)]
struct ProfileRow<'a> {
    solver: &'a str,
    tau: f64,
    rho: f64,
}

/// CSV with header `solver,tau,rho`.
pub fn write_profile_csv<W: Write>(curves: &[ProfileCurve], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if curves.iter().all(|c| c.breakpoints.is_empty()) {
        w.write_record(["solver", "tau", "rho"])?;
    }
    for c in curves {
        for &(tau, rho) in &c.breakpoints {
            w.serialize(ProfileRow {
                solver: &c.solver,
                tau,
                rho,
            })?;
        }
    }
    w.flush().map_err(|source| Error::Io {
        path: "<profile>".into(),
        source,
    })
}
