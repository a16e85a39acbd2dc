//! The two-stage active-set iteration for bound-constrained minimization.
//!
//! Each outer iteration first moves the estimated active variables onto their
//! bounds, then takes a truncated-Newton step on the remaining variables. A
//! non-monotone watchdog decides when objective values are needed: a short
//! Stage-1 move or a short Newton step is accepted without evaluating `f`,
//! and every `Z` iterations (or whenever a line search is about to run) the
//! current point is compared with the reference value, backtracking to the
//! last checkpoint if it is not better.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::activeset::{
    active_set_step, epsilon_safeguard, estimate, stationarity_measure, ActiveSetPartition,
    EpsilonState,
};
use crate::direction::{reduced_newton, DirectionInfo, DirectionParams, ForcingSchedule};
use crate::error::{Error, Result};
use crate::nonmonotone::{armijo_nonmonotone, ArmijoParams, Checkpoint, LineSearchOutcome, ReferenceMemory};
use crate::problem::{EvalCounters, Evaluator, ProblemInstance};

/// Default stationarity tolerance on `|x - P(x - g)|_inf`.
pub const DEFAULT_TOL: f64 = 1e-5;
/// Default watchdog length `Z`.
pub const DEFAULT_WATCHDOG: usize = 20;
/// Default reference-value memory `M`.
pub const DEFAULT_MEMORY: usize = 99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceLevel {
    #[default]
    Off,
    Iterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Initial active-set threshold.
    pub eps0: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Shrink factor for both step thresholds.
    pub beta: f64,
    /// Initial unit-step threshold; `None` means `max(1, stationarity(x0))`.
    pub delta0_unit: Option<f64>,
    /// Initial proximity threshold; `None` means `max(1, stationarity(x0))`.
    pub delta0_prox: Option<f64>,
    pub memory: usize,
    pub watchdog: usize,
    pub sigma1: f64,
    pub sigma2: f64,
    pub forcing_cap: f64,
    pub max_cg: usize,
    pub max_backtracks: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub max_fevals: u64,
    pub max_time: Option<Duration>,
    pub trace: TraceLevel,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps0: crate::activeset::DEFAULT_EPSILON,
            gamma: 1e-4,
            delta: 0.5,
            beta: 0.5,
            delta0_unit: None,
            delta0_prox: None,
            memory: DEFAULT_MEMORY,
            watchdog: DEFAULT_WATCHDOG,
            sigma1: 1e-9,
            sigma2: 1e9,
            forcing_cap: 0.5,
            max_cg: 100,
            max_backtracks: 60,
            tol: DEFAULT_TOL,
            max_iters: 10_000,
            max_fevals: 100_000,
            max_time: None,
            trace: TraceLevel::Off,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return bad("eps0 must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma < 0.5) {
            return bad("gamma must lie in (0, 1/2)");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        for d in [self.delta0_unit, self.delta0_prox].into_iter().flatten() {
            if !(d >= 0.0) {
                return bad("initial step thresholds must be non-negative");
            }
        }
        if self.watchdog < 1 {
            return bad("watchdog Z must be at least 1");
        }
        if !(self.sigma1 > 0.0 && self.sigma1 <= 1.0 && self.sigma2 >= 1.0) {
            return bad("need 0 < sigma1 <= 1 <= sigma2");
        }
        if !(self.forcing_cap > 0.0 && self.forcing_cap < 1.0) {
            return bad("forcing cap must lie in (0, 1)");
        }
        if self.max_cg == 0 {
            return bad("max_cg must be positive");
        }
        if !(self.tol >= 0.0) {
            return bad("tol must be non-negative");
        }
        Ok(())
    }

    fn direction_params(&self) -> DirectionParams {
        DirectionParams {
            schedule: ForcingSchedule {
                cap: self.forcing_cap,
            },
            max_cg: self.max_cg,
            sigma1: self.sigma1,
            sigma2: self.sigma2,
        }
    }

    fn armijo_params(&self) -> ArmijoParams {
        ArmijoParams {
            gamma: self.gamma,
            delta: self.delta,
            max_backtracks: self.max_backtracks,
        }
    }

    pub fn budgets(&self) -> Budgets {
        Budgets {
            max_iters: self.max_iters,
            max_fevals: self.max_fevals,
            max_time: self.max_time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    MaxFevals,
    MaxTime,
    LineSearchFailure,
    Diverged,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIters => "max_iters",
            SolveStatus::MaxFevals => "max_fevals",
            SolveStatus::MaxTime => "max_time",
            SolveStatus::LineSearchFailure => "line_search_failure",
            SolveStatus::Diverged => "diverged",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolveStatus {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "converged" => SolveStatus::Converged,
            "max_iters" => SolveStatus::MaxIters,
            "max_fevals" => SolveStatus::MaxFevals,
            "max_time" => SolveStatus::MaxTime,
            "line_search_failure" => SolveStatus::LineSearchFailure,
            "diverged" => SolveStatus::Diverged,
            other => return Err(format!("unknown status '{other}'")),
        })
    }
}

/// How an outer iteration produced the next point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// Short Newton step accepted with `alpha = 1` and no objective value.
    UnitStep,
    LineSearch,
    /// Line search from the last checkpoint after the watchdog fired.
    Backtrack,
    /// No usable non-active variables; the Stage-1 point is the next iterate.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    /// Objective at the iterate, when it was evaluated.
    pub f: Option<f64>,
    #[serde(rename = "f_R")]
    pub f_r: f64,
    pub stationarity: f64,
    pub n_lower: usize,
    pub n_upper: usize,
    pub n_nonactive: usize,
    pub alpha: f64,
    pub cg_iters: usize,
    pub channel: Channel,
}

/// Writes trace records as CSV with columns
/// `iter,f,f_R,stationarity,n_lower,n_upper,n_nonactive,alpha,cg_iters,channel`.
pub fn write_trace_csv<W: Write>(records: &[TraceRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record([
            "iter",
            "f",
            "f_R",
            "stationarity",
            "n_lower",
            "n_upper",
            "n_nonactive",
            "alpha",
            "cg_iters",
            "channel",
        ])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<trace>".into(),
        source: e,
    })?;
    Ok(())
}

mod dvector_serde {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: String,
    pub problem: String,
    #[serde(with = "dvector_serde")]
    pub x_final: DVector<f64>,
    pub f_final: f64,
    pub stationarity: f64,
    pub status: SolveStatus,
    pub counters: EvalCounters,
    pub iterations: usize,
    pub wall_time_s: f64,
    /// Final active-set threshold (absent for solvers without one).
    pub epsilon_final: Option<f64>,
    pub epsilon_halvings: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceRecord>>,
}

impl SolveReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Equal in every field except `wall_time_s`.
    pub fn same_outcome(&self, other: &SolveReport) -> bool {
        let mut a = self.clone();
        a.wall_time_s = other.wall_time_s;
        a == *other
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budgets {
    pub max_iters: usize,
    pub max_fevals: u64,
    pub max_time: Option<Duration>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Usage {
    pub iterations: usize,
    pub n_f: u64,
    pub elapsed: Duration,
}

/// `Some(status)` when the solve should stop, `None` to continue.
pub fn check_termination(
    stationarity: f64,
    tol: f64,
    usage: &Usage,
    budgets: &Budgets,
) -> Option<SolveStatus> {
    if !stationarity.is_finite() {
        return Some(SolveStatus::Diverged);
    }
    if stationarity <= tol {
        return Some(SolveStatus::Converged);
    }
    if usage.iterations >= budgets.max_iters {
        return Some(SolveStatus::MaxIters);
    }
    if usage.n_f >= budgets.max_fevals {
        return Some(SolveStatus::MaxFevals);
    }
    if budgets.max_time.is_some_and(|t| usage.elapsed >= t) {
        return Some(SolveStatus::MaxTime);
    }
    None
}

/// Observable solver events, for tests and diagnostics.
#[derive(Debug)]
pub enum SolveEvent<'a> {
    /// Start of an outer iteration at `x^k`.
    Iterate {
        iter: usize,
        x: &'a DVector<f64>,
        stationarity: f64,
    },
    /// Stage-1 point `x~^k` built from `x^k`.
    StageOne {
        iter: usize,
        x: &'a DVector<f64>,
        x_tilde: &'a DVector<f64>,
        partition: &'a ActiveSetPartition,
    },
    /// Search direction computed at `x~^k` with the partition estimated there.
    Direction {
        iter: usize,
        x_tilde: &'a DVector<f64>,
        gradient: &'a DVector<f64>,
        partition: &'a ActiveSetPartition,
        info: &'a DirectionInfo,
        eta: f64,
    },
    Checkpoint {
        j: i64,
        k: i64,
        f: f64,
        f_ref: f64,
    },
    LineSearch {
        iter: usize,
        base: &'a DVector<f64>,
        direction: &'a DVector<f64>,
        gradient: &'a DVector<f64>,
        f_ref: f64,
        gamma: f64,
        outcome: &'a LineSearchOutcome,
    },
}

/// Mutable state of one solve.
#[derive(Debug, Clone)]
pub struct DriverState {
    /// Algorithmic iteration index; reset to `l^j` on backtracking.
    pub k: i64,
    pub x: DVector<f64>,
    pub x_tilde: DVector<f64>,
    pub g_tilde: DVector<f64>,
    pub f_tilde: Option<f64>,
    pub direction: Option<DVector<f64>>,
    pub delta_unit: f64,
    pub delta_prox: f64,
    pub checkpoint_pending: bool,
    pub eps: EpsilonState,
}

/// Restores the stored checkpoint point, gradient, value and direction.
/// `k` becomes `l^j`; for the seed checkpoint it is left unchanged.
pub fn backtrack_to_checkpoint(state: &DriverState, mem: &ReferenceMemory) -> DriverState {
    let cp = mem.checkpoint();
    let mut next = state.clone();
    next.x_tilde = cp.point.clone();
    next.g_tilde = cp.gradient.clone();
    next.f_tilde = Some(cp.f);
    next.direction = cp.direction.clone();
    if mem.j() >= 0 {
        next.k = mem.last_checkpoint_iter();
    }
    next
}

pub fn solve(problem: &ProblemInstance, config: &SolverConfig, x0: &DVector<f64>) -> Result<SolveReport> {
    solve_with_observer(problem, config, x0, &mut |_| {})
}

enum Step {
    /// Continue to the direction stage at the current `x~`.
    Direction,
    /// Line search from the restored checkpoint.
    Backtrack,
}

enum Outcome {
    Next {
        x: DVector<f64>,
        g: Option<DVector<f64>>,
        f: Option<f64>,
        alpha: f64,
        cg_iters: usize,
        channel: Channel,
        partition: ActiveSetPartition,
    },
    Stop(SolveStatus),
}

pub fn solve_with_observer(
    problem: &ProblemInstance,
    config: &SolverConfig,
    x0: &DVector<f64>,
    observer: &mut dyn FnMut(&SolveEvent<'_>),
) -> Result<SolveReport> {
    config.validate()?;
    let bounds = &problem.bounds;
    let start = Instant::now();
    let mut eval = Evaluator::new(problem);
    let x0 = bounds.project(x0)?;

    let mut x = x0.clone();
    let mut g = eval.gradient(&x);
    let f0 = eval.value(&x);
    let mut f_x = Some(f0);
    let stat0 = stationarity_measure(&x, &g, bounds);
    let threshold0 = stat0.max(1.0);

    let mut state = DriverState {
        k: 0,
        x: x.clone(),
        x_tilde: x.clone(),
        g_tilde: g.clone(),
        f_tilde: None,
        direction: None,
        delta_unit: config.delta0_unit.unwrap_or(threshold0),
        delta_prox: config.delta0_prox.unwrap_or(threshold0),
        checkpoint_pending: true,
        eps: EpsilonState::new(config.eps0)?,
    };
    let mut mem = ReferenceMemory::new(
        config.memory,
        Checkpoint {
            point: x0.clone(),
            f: f0,
            gradient: g.clone(),
            direction: None,
        },
    );

    let budgets = config.budgets();
    let mut trace = match config.trace {
        TraceLevel::Off => None,
        TraceLevel::Iterations => Some(Vec::new()),
    };
    let mut iterations = 0usize;
    let mut stationarity;

    let status = loop {
        stationarity = stationarity_measure(&x, &g, bounds);
        observer(&SolveEvent::Iterate {
            iter: iterations,
            x: &x,
            stationarity,
        });
        let usage = Usage {
            iterations,
            n_f: eval.counters().n_f,
            elapsed: start.elapsed(),
        };
        if !f_x.map_or(true, f64::is_finite) || g.iter().any(|v| !v.is_finite()) {
            break SolveStatus::Diverged;
        }
        if let Some(status) = check_termination(stationarity, config.tol, &usage, &budgets) {
            break status;
        }

        state.x = x.clone();
        let outcome = iterate(
            &mut state,
            &mut mem,
            &mut eval,
            &g,
            f_x,
            config,
            iterations,
            observer,
        )?;
        match outcome {
            Outcome::Stop(status) => break status,
            Outcome::Next {
                x: x_next,
                g: g_next,
                f,
                alpha,
                cg_iters,
                channel,
                partition,
            } => {
                g = match g_next {
                    Some(gn) => gn,
                    None => eval.gradient(&x_next),
                };
                x = x_next;
                f_x = f;
                iterations += 1;
                if let Some(t) = trace.as_mut() {
                    t.push(TraceRecord {
                        iter: iterations,
                        f,
                        f_r: mem.reference_value(),
                        stationarity: stationarity_measure(&x, &g, bounds),
                        n_lower: partition.lower_active().len(),
                        n_upper: partition.upper_active().len(),
                        n_nonactive: partition.nonactive().len(),
                        alpha,
                        cg_iters,
                        channel,
                    });
                }
            }
        }
    };

    let f_final = match f_x {
        Some(f) if f.is_finite() => f,
        _ => eval.value(&x),
    };
    let (x_final, f_final) = if f_final.is_finite() {
        (x, f_final)
    } else {
        // report the last checkpoint, which always has a finite value
        let cp = mem.checkpoint();
        stationarity = stationarity_measure(&cp.point, &cp.gradient, bounds);
        (cp.point.clone(), cp.f)
    };
    let status = if status == SolveStatus::Converged || f_final.is_finite() {
        status
    } else {
        SolveStatus::Diverged
    };

    Ok(SolveReport {
        solver: "asa-bcp".into(),
        problem: problem.name.clone(),
        x_final,
        f_final,
        stationarity,
        status,
        counters: eval.counters(),
        iterations,
        wall_time_s: start.elapsed().as_secs_f64(),
        epsilon_final: Some(state.eps.epsilon),
        epsilon_halvings: state.eps.halvings,
        trace,
    })
}

/// One outer iteration from `state.x` (with gradient `g` and, when known, value `f_x`).
#[allow(clippy::too_many_arguments)]
fn iterate(
    state: &mut DriverState,
    mem: &mut ReferenceMemory,
    eval: &mut Evaluator<'_>,
    g: &DVector<f64>,
    mut f_x: Option<f64>,
    config: &SolverConfig,
    iter: usize,
    observer: &mut dyn FnMut(&SolveEvent<'_>),
) -> Result<Outcome> {
    let bounds = eval.bounds();
    let x = state.x.clone();

    // Stage 1: fix the estimated active variables at their bounds.
    let partition = estimate(&x, g, bounds, state.eps)?;
    state.x_tilde = active_set_step(&x, &partition, bounds);
    observer(&SolveEvent::StageOne {
        iter,
        x: &x,
        x_tilde: &state.x_tilde,
        partition: &partition,
    });
    let move_sq = (&state.x_tilde - &x).norm_squared();
    let moved = move_sq > 0.0;
    state.g_tilde = if moved { eval.gradient(&state.x_tilde) } else { g.clone() };
    state.f_tilde = if moved { None } else { f_x };
    // whether x~ still derives from the current x^k (false after a seed restart)
    let mut from_current = true;

    let mut step = Step::Direction;
    if move_sq.sqrt() <= state.delta_prox {
        state.delta_prox *= config.beta;
    } else {
        let fx = match f_x {
            Some(f) => f,
            None => eval.value(&x),
        };
        f_x = Some(fx);
        if !fx.is_finite() {
            return Ok(Outcome::Stop(SolveStatus::Diverged));
        }
        if fx >= mem.reference_value() {
            if mem.checkpoint().direction.is_some() {
                *state = backtrack_to_checkpoint(state, mem);
                step = Step::Backtrack;
            } else {
                // only the seed exists: drop the Stage-1 move and retry from it
                *state = backtrack_to_checkpoint(state, mem);
                state.eps = state.eps.halved();
                from_current = false;
            }
        }
    }

    // Steps that break out of this loop fall through to the backtrack line search.
    if let Step::Direction = step {
        loop {
            let partition_t = estimate(&state.x_tilde, &state.g_tilde, bounds, state.eps)?;
            let g_free_zero = partition_t
                .nonactive()
                .iter()
                .all(|&i| state.g_tilde[i] == 0.0);
            if partition_t.nonactive().is_empty() || g_free_zero {
                // Degenerate channel: x^{k+1} = x~^k.
                state.k += 1;
                return Ok(Outcome::Next {
                    x: state.x_tilde.clone(),
                    g: Some(state.g_tilde.clone()),
                    f: state.f_tilde,
                    alpha: 0.0,
                    cg_iters: 0,
                    channel: Channel::Degenerate,
                    partition: partition_t,
                });
            }

            if state.checkpoint_pending {
                let ft = value_at_tilde(state, eval);
                if !ft.is_finite() {
                    return Ok(Outcome::Stop(SolveStatus::Diverged));
                }
                if from_current {
                    apply_safeguard(state, &x, f_x);
                }
                if ft > mem.reference_value() {
                    // the Stage-1 move increased f beyond the reference value
                    state.eps = state.eps.halved();
                    if mem.checkpoint().direction.is_some() {
                        *state = backtrack_to_checkpoint(state, mem);
                        break;
                    }
                    *state = backtrack_to_checkpoint(state, mem);
                    from_current = false;
                    continue;
                }
                push(state, mem, None, observer)?;
                state.checkpoint_pending = false;
            }

            let params = config.direction_params();
            let x_tilde = state.x_tilde.clone();
            let g_tilde = state.g_tilde.clone();
            let info = reduced_newton(
                &g_tilde,
                &partition_t,
                |v| eval.hessvec(&x_tilde, &g_tilde, v),
                &params,
            )?;
            eval.add_cg_iters(info.cg_iterations);
            let g_free_norm = partition_t
                .nonactive()
                .iter()
                .map(|&i| g_tilde[i] * g_tilde[i])
                .sum::<f64>()
                .sqrt();
            observer(&SolveEvent::Direction {
                iter,
                x_tilde: &x_tilde,
                gradient: &g_tilde,
                partition: &partition_t,
                info: &info,
                eta: params.schedule.eta(g_free_norm),
            });
            let d = info.direction.clone();
            state.direction = Some(d.clone());
            if mem.last_checkpoint_iter() == state.k {
                mem.set_checkpoint_direction(d.clone());
            }

            // Watchdog after Z iterations without a checkpoint.
            if state.k >= mem.last_checkpoint_iter() + config.watchdog as i64 {
                let ft = value_at_tilde(state, eval);
                if !ft.is_finite() {
                    return Ok(Outcome::Stop(SolveStatus::Diverged));
                }
                if from_current {
                    apply_safeguard(state, &x, f_x);
                }
                if ft >= mem.reference_value() {
                    *state = backtrack_to_checkpoint(state, mem);
                    break;
                }
                push(state, mem, Some(d.clone()), observer)?;
            }

            if d.norm() <= state.delta_unit {
                state.delta_unit *= config.beta;
                state.k += 1;
                return Ok(Outcome::Next {
                    x: bounds.project_unchecked(&(&state.x_tilde + &d)),
                    g: None,
                    f: None,
                    alpha: 1.0,
                    cg_iters: info.cg_iterations,
                    channel: Channel::UnitStep,
                    partition: partition_t,
                });
            }

            if state.k != mem.last_checkpoint_iter() {
                let ft = value_at_tilde(state, eval);
                if !ft.is_finite() {
                    return Ok(Outcome::Stop(SolveStatus::Diverged));
                }
                if from_current {
                    apply_safeguard(state, &x, f_x);
                }
                if ft >= mem.reference_value() {
                    *state = backtrack_to_checkpoint(state, mem);
                    break;
                }
                push(state, mem, Some(d.clone()), observer)?;
            }

            return line_search(
                state,
                mem,
                eval,
                config,
                iter,
                Channel::LineSearch,
                info.cg_iterations,
                partition_t,
                observer,
            );
        }
    }

    // Backtracked: line search from the checkpoint along its stored direction.
    let partition_cp = estimate(&state.x_tilde, &state.g_tilde, bounds, state.eps)?;
    line_search(
        state,
        mem,
        eval,
        config,
        iter,
        Channel::Backtrack,
        0,
        partition_cp,
        observer,
    )
}

fn value_at_tilde(state: &mut DriverState, eval: &mut Evaluator<'_>) -> f64 {
    match state.f_tilde {
        Some(f) => f,
        None => {
            let f = eval.value(&state.x_tilde);
            state.f_tilde = Some(f);
            f
        }
    }
}

fn apply_safeguard(state: &mut DriverState, x: &DVector<f64>, f_x: Option<f64>) {
    if let (Some(fx), Some(ft)) = (f_x, state.f_tilde) {
        let step_sq = (x - &state.x_tilde).norm_squared();
        state.eps = epsilon_safeguard(state.eps, fx, ft, step_sq);
    }
}

fn push(
    state: &DriverState,
    mem: &mut ReferenceMemory,
    direction: Option<DVector<f64>>,
    observer: &mut dyn FnMut(&SolveEvent<'_>),
) -> Result<()> {
    let f = state.f_tilde.ok_or(Error::NonFinite)?;
    mem.push(
        state.k,
        Checkpoint {
            point: state.x_tilde.clone(),
            f,
            gradient: state.g_tilde.clone(),
            direction,
        },
    )?;
    observer(&SolveEvent::Checkpoint {
        j: mem.j(),
        k: state.k,
        f,
        f_ref: mem.reference_value(),
    });
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn line_search(
    state: &mut DriverState,
    mem: &ReferenceMemory,
    eval: &mut Evaluator<'_>,
    config: &SolverConfig,
    iter: usize,
    channel: Channel,
    cg_iters: usize,
    partition: ActiveSetPartition,
    observer: &mut dyn FnMut(&SolveEvent<'_>),
) -> Result<Outcome> {
    let d = match state.direction.clone() {
        Some(d) => d,
        None => return Err(Error::InvalidConfig("line search without a direction".into())),
    };
    let f_ref = mem.reference_value();
    let params = config.armijo_params();
    let outcome = match armijo_nonmonotone(eval, &state.x_tilde, &d, &state.g_tilde, f_ref, &params) {
        Ok(o) => o,
        Err(Error::LineSearchFailed { .. }) | Err(Error::NotDescentDirection { .. }) => {
            return Ok(Outcome::Stop(SolveStatus::LineSearchFailure))
        }
        Err(e) => return Err(e),
    };
    observer(&SolveEvent::LineSearch {
        iter,
        base: &state.x_tilde,
        direction: &d,
        gradient: &state.g_tilde,
        f_ref,
        gamma: params.gamma,
        outcome: &outcome,
    });
    state.k += 1;
    state.checkpoint_pending = true;
    Ok(Outcome::Next {
        x: outcome.x_new,
        g: None,
        f: Some(outcome.f_new),
        alpha: outcome.alpha,
        cg_iters,
        channel,
        partition,
    })
}
