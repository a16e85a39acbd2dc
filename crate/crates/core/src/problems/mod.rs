//! Built-in test problems and the QP file format.

mod qp_format;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{BoxBounds, KnownOptimum, Objective, ProblemInstance};

pub use qp_format::{load_qp, QpData, QuadraticModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    QpRandom,
    Rosenbrock,
    NonconvexQuadratic,
    SphereShifted,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRegistryEntry {
    pub name: &'static str,
    pub family: Family,
    pub description: &'static str,
    /// Condition number used by the QP generator, when relevant.
    pub cond: Option<f64>,
}

pub const REGISTRY: &[ProblemRegistryEntry] = &[
    ProblemRegistryEntry {
        name: "sphere-shifted",
        family: Family::SphereShifted,
        description: "1/2 |x - s|^2 on [-1, 1]^n with a seeded shift s",
        cond: None,
    },
    ProblemRegistryEntry {
        name: "rosenbrock",
        family: Family::Rosenbrock,
        description: "chained Rosenbrock on [-2, 2]^n, minimizer all ones",
        cond: None,
    },
    ProblemRegistryEntry {
        name: "nonconvex-quad",
        family: Family::NonconvexQuadratic,
        description: "indefinite quadratic on [-1, 1]^n",
        cond: None,
    },
    ProblemRegistryEntry {
        name: "qp-random",
        family: Family::QpRandom,
        description: "strictly convex QP, condition 1e2, planted solution",
        cond: Some(1e2),
    },
    ProblemRegistryEntry {
        name: "qp-ill",
        family: Family::QpRandom,
        description: "strictly convex QP, condition 1e4, planted solution",
        cond: Some(1e4),
    },
];

pub fn registry_names() -> Vec<String> {
    REGISTRY.iter().map(|e| e.name.to_string()).collect()
}

/// Instantiates a registered problem.
pub fn builtin(name: &str, n: usize, seed: u64) -> Result<ProblemInstance> {
    let entry = REGISTRY
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownProblem {
            name: name.to_string(),
            available: registry_names(),
        })?;
    if n == 0 {
        return Err(Error::EmptyProblem);
    }
    match entry.family {
        Family::SphereShifted => sphere_shifted(n, seed),
        Family::Rosenbrock => chained_rosenbrock(n),
        Family::NonconvexQuadratic => nonconvex_quadratic(n, seed),
        Family::QpRandom => generate_random_qp(n, seed, entry.cond.unwrap_or(1e2)),
        Family::File => unreachable!("file problems are not registered"),
    }
}

#[derive(Debug, Clone)]
pub struct ShiftedSphere {
    pub shift: DVector<f64>,
}

impl Objective for ShiftedSphere {
    fn dim(&self) -> usize {
        self.shift.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x - &self.shift).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x - &self.shift
    }

    fn hessvec(&self, _x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        Some(v.clone())
    }

    fn has_exact_hessvec(&self) -> bool {
        true
    }
}

/// `sum_i 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2`; Hessian products by finite differences.
#[derive(Debug, Clone)]
pub struct ChainedRosenbrock {
    pub n: usize,
}

impl Objective for ChainedRosenbrock {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        (0..self.n.saturating_sub(1))
            .map(|i| {
                let t = x[i + 1] - x[i] * x[i];
                100.0 * t * t + (1.0 - x[i]) * (1.0 - x[i])
            })
            .sum()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.n);
        for i in 0..self.n.saturating_sub(1) {
            let t = x[i + 1] - x[i] * x[i];
            g[i] += -400.0 * x[i] * t - 2.0 * (1.0 - x[i]);
            g[i + 1] += 200.0 * t;
        }
        g
    }
}

fn sphere_shifted(n: usize, seed: u64) -> Result<ProblemInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let bounds = BoxBounds::uniform(n, -1.0, 1.0)?;
    let x_star = bounds.project(&shift)?;
    let model = ShiftedSphere { shift };
    let f_star = model.value(&x_star);
    Ok(
        ProblemInstance::new(format!("sphere-shifted-n{n}-s{seed}"), Arc::new(model), bounds)?
            .with_known_optimum(KnownOptimum {
                x: x_star,
                f: f_star,
            }),
    )
}

fn chained_rosenbrock(n: usize) -> Result<ProblemInstance> {
    if n < 2 {
        return Err(Error::InvalidConfig("rosenbrock needs n >= 2".into()));
    }
    let bounds = BoxBounds::uniform(n, -2.0, 2.0)?;
    let x0 = DVector::from_fn(n, |i, _| if i % 2 == 0 { -1.2 } else { 1.0 });
    Ok(
        ProblemInstance::new(format!("rosenbrock-n{n}"), Arc::new(ChainedRosenbrock { n }), bounds)?
            .with_initial_point(x0)?
            .with_known_optimum(KnownOptimum {
                x: DVector::from_element(n, 1.0),
                f: 0.0,
            }),
    )
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// `R^T diag(d) R`, symmetrized so the upper triangle describes it exactly.
fn rotated_diagonal(r: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let q = r.transpose() * DMatrix::from_diagonal(d) * r;
    (&q + q.transpose()) * 0.5
}

fn nonconvex_quadratic(n: usize, seed: u64) -> Result<ProblemInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let r = random_orthogonal(n, &mut rng);
    let d = DVector::from_fn(n, |i, _| {
        if n == 1 {
            -1.0
        } else {
            -1.0 + 3.0 * i as f64 / (n - 1) as f64
        }
    });
    let q = rotated_diagonal(&r, &d);
    let c = DVector::from_fn(n, |_, _| 0.5 * rng.sample::<f64, _>(StandardNormal));
    let data = QpData {
        n,
        q_upper: QpData::triplets_from_dense(&q),
        c,
        bounds: BoxBounds::uniform(n, -1.0, 1.0)?,
    };
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
    data.to_instance(format!("nonconvex-quad-n{n}-s{seed}"))?
        .with_initial_point(x0)
}

/// A seeded strictly convex QP together with its planted KKT point.
#[derive(Debug, Clone)]
pub struct GeneratedQp {
    pub data: QpData,
    pub optimum: KnownOptimum,
}

/// Strictly convex QP `1/2 x^T Q x + c^T x` with `Q = R^T D R`, `R` orthogonal
/// and `D` log-spaced in `[1, cond]`.
///
/// The solution is planted: about a sixth of the coordinates sit at their
/// lower bound and a sixth at their upper bound, each with a multiplier in
/// `[0.5, 2]` (strict complementarity), and `c` is chosen to make that point
/// satisfy the KKT conditions.
pub fn generate_random_qp_data(n: usize, seed: u64, cond: f64) -> Result<GeneratedQp> {
    if n == 0 {
        return Err(Error::EmptyProblem);
    }
    if !(cond >= 1.0 && cond.is_finite()) {
        return Err(Error::InvalidCondition(cond));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = random_orthogonal(n, &mut rng);
    let d = DVector::from_fn(n, |i, _| {
        if n == 1 {
            1.0
        } else {
            cond.powf(i as f64 / (n - 1) as f64)
        }
    });
    let q = rotated_diagonal(&r, &d);

    let lower = DVector::from_fn(n, |_, _| -rng.random_range(0.5..1.5));
    let upper = DVector::from_fn(n, |_, _| rng.random_range(0.5..1.5));
    let mut x_star = DVector::zeros(n);
    let mut g_star = DVector::zeros(n);
    for i in 0..n {
        let pick: f64 = rng.random();
        let multiplier = rng.random_range(0.5..2.0);
        let frac = rng.random_range(0.15..0.85);
        if pick < 1.0 / 6.0 {
            x_star[i] = lower[i];
            g_star[i] = multiplier;
        } else if pick < 1.0 / 3.0 {
            x_star[i] = upper[i];
            g_star[i] = -multiplier;
        } else {
            x_star[i] = lower[i] + frac * (upper[i] - lower[i]);
        }
    }
    let c = &g_star - &q * &x_star;
    let data = QpData {
        n,
        q_upper: QpData::triplets_from_dense(&q),
        c,
        bounds: BoxBounds::new(lower, upper)?,
    };
    // evaluate with the exact model the instance will use
    let f = data.model().value(&x_star);
    Ok(GeneratedQp {
        data,
        optimum: KnownOptimum { x: x_star, f },
    })
}

pub fn generate_random_qp(n: usize, seed: u64, cond: f64) -> Result<ProblemInstance> {
    let generated = generate_random_qp_data(n, seed, cond)?;
    Ok(generated
        .data
        .to_instance(format!("qp-n{n}-s{seed}-c{cond:e}"))?
        .with_known_optimum(generated.optimum))
}

/// The default benchmark suite: 15 problems for each of `n = 50` and `n = 200`.
pub fn default_suite() -> Result<Vec<ProblemInstance>> {
    let mut out = Vec::new();
    for n in [50, 200] {
        for (seed, cond) in (1..=6).zip([1e2, 1e3, 1e4].into_iter().cycle()) {
            out.push(generate_random_qp(n, seed, cond)?);
        }
        for seed in 7..=10 {
            out.push(generate_random_qp(n, seed, 1e4)?);
        }
        out.push(sphere_shifted(n, 1)?);
        out.push(chained_rosenbrock(n)?);
        for seed in 1..=3 {
            out.push(nonconvex_quadratic(n, seed)?);
        }
    }
    Ok(out)
}
