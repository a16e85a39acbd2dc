//! Objective models, box bounds and evaluation bookkeeping.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The feasible box `[lower, upper]`. Entries may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl BoxBounds {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::EmptyProblem);
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (index, (&l, &u)) in lower.iter().zip(upper.iter()).enumerate() {
            // NaN fails the comparison too
            if !(l < u) || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::InvalidBounds {
                    index,
                    lower: l,
                    upper: u,
                });
            }
        }
        Ok(Self { lower, upper })
    }

    /// Same interval `[lower, upper]` in every coordinate.
    pub fn uniform(n: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(
            DVector::from_element(n, lower),
            DVector::from_element(n, upper),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// Componentwise median of `(l_i, x_i, u_i)`.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x.len())?;
        Ok(self.project_unchecked(x))
    }

    pub(crate) fn project_unchecked(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .map(|(&xi, (&l, &u))| xi.max(l).min(u)),
        )
    }

    pub fn is_feasible(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(&xi, (&l, &u))| l <= xi && xi <= u)
    }
}

/// A smooth objective `f: R^n -> R` with gradient and optional Hessian-vector product.
///
/// Implementations must be deterministic for a fixed point.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Exact `H(x) v`, when the model can supply it. `None` selects the
    /// forward-difference fallback.
    fn hessvec(&self, _x: &DVector<f64>, _v: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    fn has_exact_hessvec(&self) -> bool {
        false
    }
}

/// Forward-difference Hessian-vector product `(g(x + h v) - g(x)) / h`
/// with `h = sqrt(eps_mach) (1 + |x|_inf) / |v|_inf`.
///
/// `g_x` must be the gradient at `x`.
pub fn hessvec_fd(
    model: &dyn Objective,
    x: &DVector<f64>,
    g_x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    if v.len() != x.len() || g_x.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: v.len().min(g_x.len()),
        });
    }
    let v_inf = v.amax();
    if v_inf == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let h = f64::EPSILON.sqrt() * (1.0 + x.amax()) / v_inf;
    let shifted = x + v * h;
    let g_shifted = model.gradient(&shifted);
    Ok((g_shifted - g_x) / h)
}

/// Evaluation counts accumulated during one solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounters {
    pub n_f: u64,
    pub n_g: u64,
    pub n_hv: u64,
    pub cg_iters: u64,
}

/// A point together with its objective value, used as a test oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownOptimum {
    pub x: DVector<f64>,
    pub f: f64,
}

#[derive(Clone)]
pub struct ProblemInstance {
    pub name: String,
    pub model: Arc<dyn Objective>,
    pub bounds: BoxBounds,
    pub known_optimum: Option<KnownOptimum>,
    /// Default starting point; always feasible.
    pub initial_point: DVector<f64>,
}

impl fmt::Debug for ProblemInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("known_optimum", &self.known_optimum)
            .finish()
    }
}

impl ProblemInstance {
    /// Builds an instance whose default start is the projection of the origin.
    pub fn new(
        name: impl Into<String>,
        model: Arc<dyn Objective>,
        bounds: BoxBounds,
    ) -> Result<Self> {
        if model.dim() != bounds.dim() {
            return Err(Error::DimensionMismatch {
                expected: bounds.dim(),
                got: model.dim(),
            });
        }
        let initial_point = bounds.project_unchecked(&DVector::zeros(bounds.dim()));
        Ok(Self {
            name: name.into(),
            model,
            bounds,
            known_optimum: None,
            initial_point,
        })
    }

    pub fn with_initial_point(mut self, x0: DVector<f64>) -> Result<Self> {
        self.initial_point = self.bounds.project(&x0)?;
        Ok(self)
    }

    pub fn with_known_optimum(mut self, optimum: KnownOptimum) -> Self {
        self.known_optimum = Some(optimum);
        self
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }
}

/// Counting front-end to a [`ProblemInstance`]; owned by a single solve.
pub struct Evaluator<'a> {
    problem: &'a ProblemInstance,
    counters: EvalCounters,
}

impl<'a> Evaluator<'a> {
    pub fn new(problem: &'a ProblemInstance) -> Self {
        Self {
            problem,
            counters: EvalCounters::default(),
        }
    }

    pub fn problem(&self) -> &'a ProblemInstance {
        self.problem
    }

    pub fn bounds(&self) -> &'a BoxBounds {
        &self.problem.bounds
    }

    pub fn counters(&self) -> EvalCounters {
        self.counters
    }

    pub(crate) fn add_cg_iters(&mut self, iters: usize) {
        self.counters.cg_iters += iters as u64;
    }

    pub fn value(&mut self, x: &DVector<f64>) -> f64 {
        self.counters.n_f += 1;
        self.problem.model.value(x)
    }

    pub fn gradient(&mut self, x: &DVector<f64>) -> DVector<f64> {
        self.counters.n_g += 1;
        self.problem.model.gradient(x)
    }

    /// `H(x) v`, exact when the model supplies it, otherwise by forward differences
    /// (which costs one extra gradient).
    pub fn hessvec(
        &mut self,
        x: &DVector<f64>,
        g_x: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        self.counters.n_hv += 1;
        if let Some(hv) = self.problem.model.hessvec(x, v) {
            return Ok(hv);
        }
        self.counters.n_g += 1;
        hessvec_fd(self.problem.model.as_ref(), x, g_x, v)
    }
}
