//! Multiplier functions, active-set estimation and stationarity measures.
//!
//! The multiplier functions
//!
//! ```text
//! lambda_i(x) =  (u_i - x_i)^2 / ((l_i - x_i)^2 + (u_i - x_i)^2) * g_i(x)
//! mu_i(x)     = -(l_i - x_i)^2 / ((l_i - x_i)^2 + (u_i - x_i)^2) * g_i(x)
//! ```
//!
//! satisfy `g - lambda + mu = 0` and drive the estimates
//!
//! ```text
//! A_l(x) = { i : l_i <= x_i <= l_i + eps * lambda_i(x), g_i(x) > 0 }
//! A_u(x) = { i : u_i - eps * mu_i(x) <= x_i <= u_i,     g_i(x) < 0 }
//! N(x)   = everything else
//! ```
//!
//! Infinite bounds use the limits of the ratios: with `u_i = +inf` the
//! multipliers become `(g_i, 0)`, with `l_i = -inf` they become `(0, -g_i)`,
//! and a free variable splits the gradient evenly. An index can never be
//! estimated active at an infinite bound.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::BoxBounds;

/// Default active-set threshold.
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierEstimates {
    pub lambda: DVector<f64>,
    pub mu: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndexClass {
    LowerActive,
    UpperActive,
    Nonactive,
}

/// Disjoint cover of `{0, .., n-1}` by the lower-active, upper-active and
/// non-active estimates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSetPartition {
    classes: Vec<IndexClass>,
    lower_active: Vec<usize>,
    upper_active: Vec<usize>,
    nonactive: Vec<usize>,
}

impl ActiveSetPartition {
    pub fn from_classes(classes: Vec<IndexClass>) -> Self {
        let mut lower_active = Vec::new();
        let mut upper_active = Vec::new();
        let mut nonactive = Vec::new();
        for (i, c) in classes.iter().enumerate() {
            match c {
                IndexClass::LowerActive => lower_active.push(i),
                IndexClass::UpperActive => upper_active.push(i),
                IndexClass::Nonactive => nonactive.push(i),
            }
        }
        Self {
            classes,
            lower_active,
            upper_active,
            nonactive,
        }
    }

    pub fn dim(&self) -> usize {
        self.classes.len()
    }

    pub fn class(&self, i: usize) -> IndexClass {
        self.classes[i]
    }

    pub fn classes(&self) -> &[IndexClass] {
        &self.classes
    }

    pub fn lower_active(&self) -> &[usize] {
        &self.lower_active
    }

    pub fn upper_active(&self) -> &[usize] {
        &self.upper_active
    }

    pub fn nonactive(&self) -> &[usize] {
        &self.nonactive
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.classes[i] != IndexClass::Nonactive
    }
}

/// Active-set threshold together with the number of times it was halved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonState {
    pub epsilon: f64,
    pub halvings: u32,
}

impl EpsilonState {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        Ok(Self {
            epsilon,
            halvings: 0,
        })
    }

    pub(crate) fn halved(self) -> Self {
        Self {
            epsilon: 0.5 * self.epsilon,
            halvings: self.halvings + 1,
        }
    }
}

impl Default for EpsilonState {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            halvings: 0,
        }
    }
}

fn check_len(bounds: &BoxBounds, len: usize) -> Result<()> {
    if len != bounds.dim() {
        return Err(Error::DimensionMismatch {
            expected: bounds.dim(),
            got: len,
        });
    }
    Ok(())
}

fn multiplier_pair(x: f64, g: f64, l: f64, u: f64) -> (f64, f64) {
    match (l.is_finite(), u.is_finite()) {
        (true, true) => {
            let to_lower = (l - x) * (l - x);
            let to_upper = (u - x) * (u - x);
            let denom = to_lower + to_upper;
            (to_upper / denom * g, -(to_lower / denom) * g)
        }
        (true, false) => (g, 0.0),
        (false, true) => (0.0, -g),
        (false, false) => (0.5 * g, -0.5 * g),
    }
}

pub fn multipliers(
    x: &DVector<f64>,
    g: &DVector<f64>,
    bounds: &BoxBounds,
) -> Result<MultiplierEstimates> {
    check_len(bounds, x.len())?;
    check_len(bounds, g.len())?;
    let n = x.len();
    let mut lambda = DVector::zeros(n);
    let mut mu = DVector::zeros(n);
    for i in 0..n {
        let (lam, m) = multiplier_pair(x[i], g[i], bounds.lower()[i], bounds.upper()[i]);
        lambda[i] = lam;
        mu[i] = m;
    }
    Ok(MultiplierEstimates { lambda, mu })
}

fn classify(x: f64, g: f64, l: f64, u: f64, epsilon: f64) -> IndexClass {
    let (lambda, mu) = multiplier_pair(x, g, l, u);
    if g > 0.0 && l.is_finite() && l <= x && x <= l + epsilon * lambda {
        IndexClass::LowerActive
    } else if g < 0.0 && u.is_finite() && u - epsilon * mu <= x && x <= u {
        IndexClass::UpperActive
    } else {
        IndexClass::Nonactive
    }
}

/// Estimates the lower-active, upper-active and non-active index sets at `x`.
pub fn estimate(
    x: &DVector<f64>,
    g: &DVector<f64>,
    bounds: &BoxBounds,
    eps: EpsilonState,
) -> Result<ActiveSetPartition> {
    check_len(bounds, x.len())?;
    check_len(bounds, g.len())?;
    let classes = (0..x.len())
        .map(|i| {
            classify(
                x[i],
                g[i],
                bounds.lower()[i],
                bounds.upper()[i],
                eps.epsilon,
            )
        })
        .collect();
    Ok(ActiveSetPartition::from_classes(classes))
}

/// Fixes the estimated active variables at their bounds.
pub fn active_set_step(
    x: &DVector<f64>,
    partition: &ActiveSetPartition,
    bounds: &BoxBounds,
) -> DVector<f64> {
    let mut moved = x.clone();
    for &i in partition.lower_active() {
        moved[i] = bounds.lower()[i];
    }
    for &i in partition.upper_active() {
        moved[i] = bounds.upper()[i];
    }
    moved
}

/// `|x - P(x - g)|_inf`, zero exactly at stationary points.
pub fn stationarity_measure(x: &DVector<f64>, g: &DVector<f64>, bounds: &BoxBounds) -> f64 {
    x.iter()
        .zip(g.iter())
        .zip(bounds.lower().iter().zip(bounds.upper().iter()))
        .map(|((&xi, &gi), (&l, &u))| (xi - (xi - gi).max(l).min(u)).abs())
        .fold(0.0, f64::max)
}

/// First-order conditions expressed through a partition computed at `x`:
/// `max{l_i - x_i, -g_i} = 0` on lower-active indices, `max{x_i - u_i, g_i} = 0`
/// on upper-active ones and `g_i = 0` elsewhere, each within `tol`.
pub fn partition_stationarity_check(
    x: &DVector<f64>,
    g: &DVector<f64>,
    bounds: &BoxBounds,
    partition: &ActiveSetPartition,
    tol: f64,
) -> bool {
    let lower_ok = partition
        .lower_active()
        .iter()
        .all(|&i| (bounds.lower()[i] - x[i]).max(-g[i]).abs() <= tol);
    let upper_ok = partition
        .upper_active()
        .iter()
        .all(|&i| (x[i] - bounds.upper()[i]).max(g[i]).abs() <= tol);
    let free_ok = partition.nonactive().iter().all(|&i| g[i].abs() <= tol);
    lower_ok && upper_ok && free_ok
}

/// Halves `epsilon` when the active-set move from `x` to `x~` failed to give
/// `f(x~) - f(x) <= -|x - x~|^2 / (2 eps)`.
pub fn epsilon_safeguard(
    eps: EpsilonState,
    f_x: f64,
    f_xtilde: f64,
    step_norm_sq: f64,
) -> EpsilonState {
    if step_norm_sq <= 0.0 {
        return eps;
    }
    let abs_tol = 1e-12 * f_x.abs().max(1.0);
    let required = -step_norm_sq / (2.0 * eps.epsilon);
    if f_xtilde - f_x > required + abs_tol {
        eps.halved()
    } else {
        eps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn eps(e: f64) -> EpsilonState {
        EpsilonState::new(e).unwrap()
    }

    #[test]
    fn multiplier_examples() {
        let b = BoxBounds::uniform(1, 0.0, 2.0).unwrap();
        let m = multipliers(&dv(&[0.5]), &dv(&[1.0]), &b).unwrap();
        // (1.5^2) / (0.5^2 + 1.5^2) = 2.25 / 2.5
        assert_relative_eq!(m.lambda[0], 0.9, epsilon = 1e-15);
        assert_relative_eq!(m.mu[0], -0.1, epsilon = 1e-15);

        let m = multipliers(&dv(&[0.7]), &dv(&[0.0]), &b).unwrap();
        assert_eq!((m.lambda[0], m.mu[0].abs()), (0.0, 0.0));

        let m = multipliers(&dv(&[0.0]), &dv(&[2.0]), &b).unwrap();
        assert_eq!(m.lambda[0], 2.0);
        assert_eq!(m.mu[0], 0.0);
    }

    #[test]
    fn multipliers_with_infinite_bounds() {
        let b = BoxBounds::new(
            dv(&[0.0, f64::NEG_INFINITY, f64::NEG_INFINITY]),
            dv(&[f64::INFINITY, 1.0, f64::INFINITY]),
        )
        .unwrap();
        let g = dv(&[3.0, -2.0, 4.0]);
        let m = multipliers(&dv(&[0.5, 0.5, 0.5]), &g, &b).unwrap();
        assert_eq!(m.lambda, dv(&[3.0, 0.0, 2.0]));
        assert_eq!(m.mu, dv(&[0.0, 2.0, -2.0]));
        assert_eq!(g - &m.lambda + &m.mu, DVector::zeros(3));
    }

    #[test]
    fn multipliers_dimension_mismatch() {
        let b = BoxBounds::uniform(2, 0.0, 1.0).unwrap();
        assert!(multipliers(&dv(&[0.5]), &dv(&[1.0]), &b).is_err());
    }

    #[test]
    fn estimate_examples() {
        let b = BoxBounds::uniform(1, 0.0, 2.0).unwrap();
        let e = eps(0.1);
        let p = estimate(&dv(&[0.0]), &dv(&[2.0]), &b, e).unwrap();
        assert_eq!(p.lower_active(), &[0]);

        let p = estimate(&dv(&[1.0]), &dv(&[5.0]), &b, e).unwrap();
        assert_eq!(p.nonactive(), &[0]);

        let p = estimate(&dv(&[1.99]), &dv(&[-3.0]), &b, e).unwrap();
        assert_eq!(p.upper_active(), &[0]);
    }

    #[test]
    fn infinite_bound_never_active() {
        let b = BoxBounds::new(dv(&[f64::NEG_INFINITY]), dv(&[f64::INFINITY])).unwrap();
        for g in [-1e9, -1.0, 1.0, 1e9] {
            let p = estimate(&dv(&[0.0]), &dv(&[g]), &b, eps(1e6)).unwrap();
            assert_eq!(p.nonactive(), &[0]);
        }
    }

    #[test]
    fn active_set_step_examples() {
        let b = BoxBounds::uniform(2, 0.0, 2.0).unwrap();
        let p = ActiveSetPartition::from_classes(vec![
            IndexClass::LowerActive,
            IndexClass::Nonactive,
        ]);
        assert_eq!(active_set_step(&dv(&[0.3, 1.0]), &p, &b), dv(&[0.0, 1.0]));

        let p = ActiveSetPartition::from_classes(vec![IndexClass::Nonactive; 2]);
        assert_eq!(active_set_step(&dv(&[0.3, 1.0]), &p, &b), dv(&[0.3, 1.0]));

        let p = ActiveSetPartition::from_classes(vec![
            IndexClass::UpperActive,
            IndexClass::LowerActive,
        ]);
        assert_eq!(active_set_step(&dv(&[1.99, 0.05]), &p, &b), dv(&[2.0, 0.0]));
    }

    #[test]
    fn stationarity_examples() {
        let b = BoxBounds::uniform(2, 0.0, 2.0).unwrap();
        assert_eq!(stationarity_measure(&dv(&[0.0, 1.0]), &dv(&[1.0, 0.0]), &b), 0.0);
        assert_eq!(stationarity_measure(&dv(&[1.0, 1.0]), &dv(&[0.5, 0.0]), &b), 0.5);
        assert_eq!(stationarity_measure(&dv(&[0.3, 1.7]), &dv(&[0.0, 0.0]), &b), 0.0);
    }

    #[test]
    fn partition_check_examples() {
        let b = BoxBounds::uniform(2, 0.0, 2.0).unwrap();
        let x = dv(&[0.0, 1.0]);
        let g = dv(&[1.0, 0.0]);
        let p = estimate(&x, &g, &b, eps(0.1)).unwrap();
        assert_eq!(p.lower_active(), &[0]);
        assert!(partition_stationarity_check(&x, &g, &b, &p, 1e-12));

        let x = dv(&[1.0, 1.0]);
        let g = dv(&[0.5, 0.0]);
        let p = estimate(&x, &g, &b, eps(1e-6)).unwrap();
        assert!(!partition_stationarity_check(&x, &g, &b, &p, 1e-8));

        let b1 = BoxBounds::uniform(1, 0.0, 2.0).unwrap();
        let p = estimate(&dv(&[0.0]), &dv(&[2.0]), &b1, eps(1e-6)).unwrap();
        assert_eq!(p.lower_active(), &[0]);
        assert!(partition_stationarity_check(&dv(&[0.0]), &dv(&[2.0]), &b1, &p, 0.0));
    }

    #[test]
    fn safeguard_examples() {
        let e = eps(1e-2);
        let out = epsilon_safeguard(e, 10.0, 9.0, 1.0);
        assert_eq!(out.epsilon, 5e-3);
        assert_eq!(out.halvings, 1);

        assert_eq!(epsilon_safeguard(e, 10.0, 11.0, 0.0), e);

        // -1 / (2 * 0.25) = -2, exactly representable
        let e = eps(0.25);
        assert_eq!(epsilon_safeguard(e, 10.0, 8.0, 1.0), e);
    }

    #[test]
    fn epsilon_must_be_positive() {
        assert!(EpsilonState::new(0.0).is_err());
        assert!(EpsilonState::new(f64::NAN).is_err());
    }
}
