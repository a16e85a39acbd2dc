//! Truncated-Newton search direction on the estimated non-active subspace.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::activeset::ActiveSetPartition;
use crate::error::{Error, Result};

/// Inexact-Newton forcing term `eta = min(cap, sqrt(|g_N|))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingSchedule {
    pub cap: f64,
}

impl Default for ForcingSchedule {
    fn default() -> Self {
        Self { cap: 0.5 }
    }
}

impl ForcingSchedule {
    pub fn eta(&self, reduced_grad_norm: f64) -> f64 {
        self.cap.min(reduced_grad_norm.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    ResidualMet,
    MaxIters,
    NegativeCurvature,
    /// No direction was computed because the reduced gradient vanished.
    ZeroGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionInfo {
    pub direction: DVector<f64>,
    pub cg_iterations: usize,
    /// `|H_NN d_N + g_N|` for the CG iterate (before any safeguard replacement).
    pub final_residual_norm: f64,
    /// The returned direction is steepest descent on `N` rather than the CG iterate.
    pub fallback_used: bool,
    pub truncation_reason: Truncation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionParams {
    pub schedule: ForcingSchedule,
    pub max_cg: usize,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl Default for DirectionParams {
    fn default() -> Self {
        Self {
            schedule: ForcingSchedule::default(),
            max_cg: 100,
            sigma1: 1e-9,
            sigma2: 1e9,
        }
    }
}

/// `d^T g <= -sigma1 |g|^2` and `|d| <= sigma2 |g|`.
pub fn is_gradient_related(
    d_n: &DVector<f64>,
    g_n: &DVector<f64>,
    sigma1: f64,
    sigma2: f64,
) -> bool {
    let g_sq = g_n.norm_squared();
    d_n.dot(g_n) <= -sigma1 * g_sq && d_n.norm() <= sigma2 * g_sq.sqrt()
}

/// Returns `d_n` if it is gradient-related to `g_n`, otherwise `-g_n`.
pub fn enforce_gradient_related(
    d_n: &DVector<f64>,
    g_n: &DVector<f64>,
    sigma1: f64,
    sigma2: f64,
) -> Result<DVector<f64>> {
    if d_n.len() != g_n.len() {
        return Err(Error::DimensionMismatch {
            expected: g_n.len(),
            got: d_n.len(),
        });
    }
    if g_n.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroReducedGradient);
    }
    if is_gradient_related(d_n, g_n, sigma1, sigma2) {
        Ok(d_n.clone())
    } else {
        Ok(-g_n)
    }
}

fn gather(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

fn scatter(v: &DVector<f64>, idx: &[usize], n: usize) -> DVector<f64> {
    let mut out = DVector::zeros(n);
    for (k, &i) in idx.iter().enumerate() {
        out[i] = v[k];
    }
    out
}

/// Conjugate gradient on `H_NN d_N = -g_N`, truncated by the forcing term, the
/// iteration cap, or the first direction of non-positive curvature.
///
/// `hessvec` receives a full-length vector (zero outside `N`) and must return
/// the full-length product `H v`. Active coordinates of the result are exactly
/// zero.
pub fn reduced_newton<F>(
    g: &DVector<f64>,
    partition: &ActiveSetPartition,
    mut hessvec: F,
    params: &DirectionParams,
) -> Result<DirectionInfo>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = g.len();
    if partition.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: partition.dim(),
        });
    }
    let free = partition.nonactive();
    if free.is_empty() {
        return Err(Error::EmptyNonactive);
    }
    let g_n = gather(g, free);
    let g_norm = g_n.norm();
    if g_norm == 0.0 {
        return Err(Error::ZeroReducedGradient);
    }

    let target = params.schedule.eta(g_norm) * g_norm;
    let max_iters = params.max_cg.min(free.len()).max(1);

    let mut d = DVector::zeros(free.len());
    let mut r = -&g_n;
    let mut p = r.clone();
    let mut rr = r.norm_squared();
    let mut iters = 0;
    let mut reason = Truncation::MaxIters;

    while iters < max_iters {
        let hp = gather(&hessvec(&scatter(&p, free, n))?, free);
        let curvature = p.dot(&hp);
        if !(curvature > 0.0) {
            reason = Truncation::NegativeCurvature;
            break;
        }
        let step = rr / curvature;
        d.axpy(step, &p, 1.0);
        r.axpy(-step, &hp, 1.0);
        iters += 1;
        let rr_next = r.norm_squared();
        if rr_next.sqrt() <= target {
            reason = Truncation::ResidualMet;
            break;
        }
        p = &r + &p * (rr_next / rr);
        rr = rr_next;
    }

    let residual = r.norm();
    let mut fallback_used = false;
    let d_n = if iters == 0 {
        // negative curvature on the very first search direction
        fallback_used = true;
        -&g_n
    } else {
        let safe = enforce_gradient_related(&d, &g_n, params.sigma1, params.sigma2)?;
        fallback_used |= safe != d;
        safe
    };

    Ok(DirectionInfo {
        direction: scatter(&d_n, free, n),
        cg_iterations: iters,
        final_residual_norm: residual,
        fallback_used,
        truncation_reason: reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activeset::IndexClass;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn all_free(n: usize) -> ActiveSetPartition {
        ActiveSetPartition::from_classes(vec![IndexClass::Nonactive; n])
    }

    fn matvec(h: DMatrix<f64>) -> impl FnMut(&DVector<f64>) -> Result<DVector<f64>> {
        move |v| Ok(&h * v)
    }

    #[test]
    fn newton_step_on_diagonal_quadratic() {
        let h = DMatrix::from_diagonal(&dv(&[2.0, 4.0]));
        let g = dv(&[2.0, 4.0]);
        // force an exact solve; the default forcing term stops after one step here
        let params = DirectionParams {
            schedule: ForcingSchedule { cap: 1e-14 },
            ..DirectionParams::default()
        };
        let info = reduced_newton(&g, &all_free(2), matvec(h), &params).unwrap();
        assert_relative_eq!(info.direction, dv(&[-1.0, -1.0]), epsilon = 1e-12);
        assert!(info.cg_iterations <= 2);
        assert!(info.final_residual_norm < 1e-12);
        assert!(!info.fallback_used);
    }

    #[test]
    fn active_coordinates_are_zero() {
        let h = DMatrix::identity(2, 2);
        let part = ActiveSetPartition::from_classes(vec![
            IndexClass::LowerActive,
            IndexClass::Nonactive,
        ]);
        let g = dv(&[7.0, 3.0]);
        let info = reduced_newton(&g, &part, matvec(h), &DirectionParams::default()).unwrap();
        assert_eq!(info.direction[0].to_bits(), 0.0f64.to_bits());
        assert_relative_eq!(info.direction[1], -3.0, epsilon = 1e-14);
    }

    #[test]
    fn negative_curvature_falls_back_to_steepest_descent() {
        let h = DMatrix::from_element(1, 1, -1.0);
        let g = dv(&[-1.0]);
        let info = reduced_newton(&g, &all_free(1), matvec(h), &DirectionParams::default())
            .unwrap();
        assert_eq!(info.direction, dv(&[1.0]));
        assert_eq!(info.truncation_reason, Truncation::NegativeCurvature);
        assert!(info.fallback_used);
    }

    #[test]
    fn negative_curvature_keeps_partial_iterate() {
        // positive curvature along g, negative along the second conjugate direction
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let g = dv(&[1.0, 0.1]);
        let params = DirectionParams {
            schedule: ForcingSchedule { cap: 0.01 },
            ..DirectionParams::default()
        };
        let info = reduced_newton(&g, &all_free(2), matvec(h), &params).unwrap();
        assert_eq!(info.truncation_reason, Truncation::NegativeCurvature);
        assert_eq!(info.cg_iterations, 1);
        assert!(info.direction.dot(&g) < 0.0);
    }

    #[test]
    fn rejects_degenerate_requests() {
        let h = DMatrix::identity(2, 2);
        let part = ActiveSetPartition::from_classes(vec![IndexClass::LowerActive; 2]);
        assert!(matches!(
            reduced_newton(&dv(&[1.0, 1.0]), &part, matvec(h.clone()), &DirectionParams::default()),
            Err(Error::EmptyNonactive)
        ));
        assert!(matches!(
            reduced_newton(&dv(&[0.0, 0.0]), &all_free(2), matvec(h), &DirectionParams::default()),
            Err(Error::ZeroReducedGradient)
        ));
    }

    #[test]
    fn forcing_residual_is_met_on_spd() {
        let h = DMatrix::from_fn(6, 6, |i, j| if i == j { 10.0 + i as f64 } else { 1.0 });
        let g = dv(&[1.0, -2.0, 0.5, 3.0, -1.0, 0.25]);
        let params = DirectionParams::default();
        let info = reduced_newton(&g, &all_free(6), matvec(h.clone()), &params).unwrap();
        assert_eq!(info.truncation_reason, Truncation::ResidualMet);
        let true_residual = (&h * &info.direction + &g).norm();
        assert!(true_residual <= params.schedule.eta(g.norm()) * g.norm() * (1.0 + 1e-10));
    }

    #[test]
    fn safeguard_examples() {
        let g = dv(&[1.0, -2.0]);
        assert_eq!(enforce_gradient_related(&-&g, &g, 1e-9, 1e9).unwrap(), -&g);
        assert_eq!(enforce_gradient_related(&g, &g, 1e-9, 1e9).unwrap(), -&g);

        let sigma2 = 10.0;
        let long = -&g * (2.0 * sigma2);
        assert_eq!(enforce_gradient_related(&long, &g, 1e-9, sigma2).unwrap(), -&g);

        assert!(matches!(
            enforce_gradient_related(&g, &dv(&[0.0, 0.0]), 1e-9, 1e9),
            Err(Error::ZeroReducedGradient)
        ));
    }

    #[test]
    fn forcing_term_vanishes() {
        let s = ForcingSchedule::default();
        assert_eq!(s.eta(100.0), 0.5);
        assert_eq!(s.eta(1e-4), 1e-2);
        assert!(s.eta(1e-16) <= 1e-8);
    }
}
