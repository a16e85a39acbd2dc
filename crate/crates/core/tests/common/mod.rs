//! Test oracles shared by the integration tests.
#![allow(dead_code)]

use asabcp_core::Objective;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    Lower,
    Upper,
    Free,
}

/// Minimizer of `1/2 x'Qx + c'x` over `[l, u]` by trying all `3^n` faces.
///
/// On each face the free block solves `Q_FF x_F = -(c_F + Q_FA x_A)`; a
/// candidate is kept when it is feasible and the gradient has the right sign
/// on every fixed index. Returns `(x*, f*)`.
pub fn enumerate_box_qp(
    q: &DMatrix<f64>,
    c: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> (DVector<f64>, f64) {
    let n = c.len();
    assert!(n <= 14, "enumeration is exponential in n");
    let scale = q.amax().max(c.amax()).max(1.0);
    let feas_tol = 1e-10 * (1.0 + lower.amax().max(upper.amax()).min(1e6));
    let sign_tol = 1e-9 * scale;
    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut faces = vec![Face::Free; n];
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut r = code;
        for face in faces.iter_mut() {
            *face = match r % 3 {
                0 => Face::Free,
                1 => Face::Lower,
                _ => Face::Upper,
            };
            r /= 3;
        }
        let Some(x) = solve_face(q, c, lower, upper, &faces) else {
            continue;
        };
        let feasible = (0..n).all(|i| x[i] >= lower[i] - feas_tol && x[i] <= upper[i] + feas_tol);
        if !feasible {
            continue;
        }
        let g = q * &x + c;
        let signs_ok = (0..n).all(|i| match faces[i] {
            Face::Lower => g[i] >= -sign_tol,
            Face::Upper => g[i] <= sign_tol,
            Face::Free => true,
        });
        if !signs_ok {
            continue;
        }
        let x = DVector::from_fn(n, |i, _| x[i].clamp(lower[i], upper[i]));
        let f = 0.5 * x.dot(&(q * &x)) + c.dot(&x);
        if best.as_ref().is_none_or(|(_, fb)| f < *fb) {
            best = Some((x, f));
        }
    }
    best.expect("a strictly convex box QP has a KKT point")
}

fn solve_face(
    q: &DMatrix<f64>,
    c: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    faces: &[Face],
) -> Option<DVector<f64>> {
    let n = c.len();
    let mut x = DVector::zeros(n);
    let mut free = Vec::new();
    for i in 0..n {
        match faces[i] {
            Face::Lower if lower[i].is_finite() => x[i] = lower[i],
            Face::Upper if upper[i].is_finite() => x[i] = upper[i],
            Face::Free => free.push(i),
            _ => return None,
        }
    }
    if free.is_empty() {
        return Some(x);
    }
    let m = free.len();
    let q_ff = DMatrix::from_fn(m, m, |a, b| q[(free[a], free[b])]);
    let rhs = DVector::from_fn(m, |a, _| {
        let i = free[a];
        let coupled: f64 = (0..n)
            .filter(|&j| faces[j] != Face::Free)
            .map(|j| q[(i, j)] * x[j])
            .sum();
        -(c[i] + coupled)
    });
    let sol = q_ff.cholesky()?.solve(&rhs);
    for (a, &i) in free.iter().enumerate() {
        x[i] = sol[a];
    }
    Some(x)
}

/// Central-difference gradient.
pub fn fd_gradient(model: &dyn Objective, x: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    DVector::from_fn(n, |i, _| {
        let h = 1e-6 * (1.0 + x[i].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        (model.value(&xp) - model.value(&xm)) / (2.0 * h)
    })
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max(q: &DMatrix<f64>) -> f64 {
    q.clone().symmetric_eigenvalues().max()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}
