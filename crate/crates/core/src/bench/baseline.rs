use std::time::Instant;

use nalgebra::DVector;

use crate::activeset::stationarity_measure;
use crate::driver::{check_termination, Budgets, SolveReport, SolveStatus, Usage};
use crate::error::Result;
use crate::problem::{Evaluator, ProblemInstance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub tol: f64,
    pub gamma: f64,
    pub delta: f64,
    pub max_backtracks: usize,
    pub budgets: Budgets,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            tol: crate::driver::DEFAULT_TOL,
            gamma: 1e-4,
            delta: 0.5,
            max_backtracks: 60,
            budgets: Budgets {
                max_iters: 10_000,
                max_fevals: 100_000,
                max_time: None,
            },
        }
    }
}

/// Projected gradient `x+ = P(x - t g)` with a monotone Armijo rule on `t`
/// along the projection arc, starting from `t = 1` each iteration.
pub fn projected_gradient_solve(
    problem: &ProblemInstance,
    config: &BaselineConfig,
    x0: &DVector<f64>,
) -> Result<SolveReport> {
    let start = Instant::now();
    let bounds = &problem.bounds;
    let mut eval = Evaluator::new(problem);
    let mut x = bounds.project(x0)?;
    let mut f = eval.value(&x);
    let mut g = eval.gradient(&x);
    let mut iterations = 0;
    let mut stationarity;

    let status = loop {
        stationarity = stationarity_measure(&x, &g, bounds);
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            break SolveStatus::Diverged;
        }
        let usage = Usage {
            iterations,
            n_f: eval.counters().n_f,
            elapsed: start.elapsed(),
        };
        if let Some(status) = check_termination(stationarity, config.tol, &usage, &config.budgets) {
            break status;
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=config.max_backtracks {
            let trial = bounds.project_unchecked(&(&x - &g * t));
            let f_trial = eval.value(&trial);
            let decrease = g.dot(&(&trial - &x));
            if f_trial <= f + config.gamma * decrease {
                accepted = Some((trial, f_trial));
                break;
            }
            t *= config.delta;
        }
        let Some((x_next, f_next)) = accepted else {
            break SolveStatus::LineSearchFailure;
        };
        x = x_next;
        f = f_next;
        g = eval.gradient(&x);
        iterations += 1;
    };

    Ok(SolveReport {
        solver: "pg".into(),
        problem: problem.name.clone(),
        x_final: x,
        f_final: f,
        stationarity,
        status,
        counters: eval.counters(),
        iterations,
        wall_time_s: start.elapsed().as_secs_f64(),
        epsilon_final: None,
        epsilon_halvings: 0,
        trace: None,
    })
}
