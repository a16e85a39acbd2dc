//! Reference-value memory and the non-monotone projected Armijo search.

use std::collections::VecDeque;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problem::Evaluator;

/// A stored point the solver can return to: the point, its objective value,
/// its gradient and (once computed) the search direction taken from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub point: DVector<f64>,
    pub f: f64,
    pub gradient: DVector<f64>,
    /// `None` only for the seed checkpoint at the starting point, or for a
    /// checkpoint pushed before its direction was computed.
    pub direction: Option<DVector<f64>>,
}

/// Checkpoint bookkeeping for the non-monotone stabilization.
///
/// The reference value after the `j`-th checkpoint is
/// `f_R^j = max_{0 <= i <= min(j, M)} f^{j-i}`; before any checkpoint it is
/// the starting value.
#[derive(Debug, Clone)]
pub struct ReferenceMemory {
    window: VecDeque<f64>,
    memory: usize,
    j: i64,
    l_j: i64,
    f_r: f64,
    checkpoint: Checkpoint,
}

impl ReferenceMemory {
    /// `j = -1`, `l^{-1} = -1`, `f_R = f0`, seed checkpoint at the start point.
    pub fn new(memory: usize, seed: Checkpoint) -> Self {
        let f0 = seed.f;
        let mut window = VecDeque::with_capacity(memory + 1);
        window.push_back(f0);
        Self {
            window,
            memory,
            j: -1,
            l_j: -1,
            f_r: f0,
            checkpoint: seed,
        }
    }

    /// Memory with a seed value only; the seed checkpoint is empty.
    pub fn init(f0: f64, memory: usize) -> Self {
        Self::new(
            memory,
            Checkpoint {
                point: DVector::zeros(0),
                f: f0,
                gradient: DVector::zeros(0),
                direction: None,
            },
        )
    }

    pub fn reference_value(&self) -> f64 {
        self.f_r
    }

    /// Index of the latest checkpoint (`-1` before the first one).
    pub fn j(&self) -> i64 {
        self.j
    }

    /// Iteration at which the latest checkpoint was taken.
    pub fn last_checkpoint_iter(&self) -> i64 {
        self.l_j
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn window(&self) -> impl Iterator<Item = f64> + '_ {
        self.window.iter().copied()
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.checkpoint
    }

    /// `j := j + 1`, `l^j := k`, append `f_val` and recompute `f_R`.
    pub fn push(&mut self, k: i64, checkpoint: Checkpoint) -> Result<()> {
        if !checkpoint.f.is_finite() {
            return Err(Error::NonFinite);
        }
        if self.j < 0 {
            // the seed value does not enter f_R^0
            self.window.clear();
        }
        self.j += 1;
        self.l_j = k;
        self.window.push_back(checkpoint.f);
        while self.window.len() > self.memory + 1 {
            self.window.pop_front();
        }
        self.f_r = self.window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.checkpoint = checkpoint;
        Ok(())
    }

    pub(crate) fn set_checkpoint_direction(&mut self, direction: DVector<f64>) {
        self.checkpoint.direction = Some(direction);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoParams {
    pub gamma: f64,
    pub delta: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self {
            gamma: 1e-4,
            delta: 0.5,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchOutcome {
    pub alpha: f64,
    pub x_new: DVector<f64>,
    pub f_new: f64,
    pub backtracks: usize,
}

/// Takes `alpha = delta^nu` for the smallest `nu >= 0` with
/// `f(P(x + delta^nu d)) <= f_ref + gamma delta^nu g^T d`.
pub fn armijo_nonmonotone(
    eval: &mut Evaluator<'_>,
    x: &DVector<f64>,
    d: &DVector<f64>,
    g: &DVector<f64>,
    f_ref: f64,
    params: &ArmijoParams,
) -> Result<LineSearchOutcome> {
    let slope = g.dot(d);
    if !(slope < 0.0) {
        return Err(Error::NotDescentDirection { slope });
    }
    let bounds = eval.bounds();
    let mut alpha = 1.0;
    for nu in 0..=params.max_backtracks {
        let trial = bounds.project_unchecked(&(x + d * alpha));
        let f_trial = eval.value(&trial);
        if f_trial <= f_ref + params.gamma * alpha * slope {
            return Ok(LineSearchOutcome {
                alpha,
                x_new: trial,
                f_new: f_trial,
                backtracks: nu,
            });
        }
        alpha *= params.delta;
    }
    Err(Error::LineSearchFailed {
        backtracks: params.max_backtracks,
    })
}
