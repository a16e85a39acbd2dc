mod common;

use std::sync::Arc;

use asabcp_core::activeset::estimate;
use asabcp_core::bench::{
    performance_profile, projected_gradient_solve, run_suite, BaselineConfig, MetricsTable, ProfileMetric,
    SolverKind, SuiteOptions,
};
use asabcp_core::driver::{write_trace_csv, TraceLevel};
use asabcp_core::problems::{builtin, generate_random_qp, generate_random_qp_data, QuadraticModel};
use asabcp_core::{
    solve, solve_with_observer, BoxBounds, EpsilonState, IndexClass, ProblemInstance, SolveEvent, SolveReport,
    SolveStatus, SolverConfig,
};
use common::enumerate_box_qp;
use nalgebra::{DMatrix, DVector};

#[test]
fn random_qps_reach_the_enumerated_optimum() {
    for seed in 1..=6 {
        let gen = generate_random_qp_data(7, seed, 1e3).unwrap();
        let (_, f_star) = enumerate_box_qp(
            &gen.data.q_dense(),
            &gen.data.c,
            gen.data.bounds.lower(),
            gen.data.bounds.upper(),
        );
        let p = gen.data.to_instance("qp").unwrap();
        let cfg = SolverConfig {
            tol: 1e-9,
            ..SolverConfig::default()
        };
        let r = solve(&p, &cfg, &p.initial_point).unwrap();
        assert_eq!(r.status, SolveStatus::Converged, "seed {seed}");
        assert!(common::rel_err(r.f_final, f_star) <= 1e-8, "seed {seed}: {} vs {f_star}", r.f_final);
    }
}

#[test]
fn infinite_bounds_are_handled() {
    // min 1/2 |x|^2 - (3, -3, 0.5) x on l = (-inf, -1, 0), u = (1, inf, inf)
    let q = DMatrix::identity(3, 3);
    let c = DVector::from_vec(vec![-3.0, 3.0, -0.5]);
    let bounds = BoxBounds::new(
        DVector::from_vec(vec![f64::NEG_INFINITY, -1.0, 0.0]),
        DVector::from_vec(vec![1.0, f64::INFINITY, f64::INFINITY]),
    )
    .unwrap();
    let p = ProblemInstance::new("inf", Arc::new(QuadraticModel { q, c }), bounds).unwrap();
    let r = solve(&p, &SolverConfig::default(), &p.initial_point).unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    assert!((r.x_final - DVector::from_vec(vec![1.0, -1.0, 0.5])).amax() <= 1e-6);
}

#[test]
fn nonconvex_problems_reach_stationary_points() {
    for seed in 1..=3 {
        let p = builtin("nonconvex-quad", 30, seed).unwrap();
        let r = solve(&p, &SolverConfig::default(), &p.initial_point).unwrap();
        assert_eq!(r.status, SolveStatus::Converged, "seed {seed}");
        assert!(r.stationarity <= 1e-5);
        assert!(r.f_final < p.model.value(&p.initial_point));
    }
}

#[test]
fn rosenbrock_with_finite_difference_products_converges() {
    let p = builtin("rosenbrock", 20, 0).unwrap();
    let r = solve(&p, &SolverConfig::default(), &p.initial_point).unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    assert!(r.counters.n_hv > 0);
    assert!(r.counters.n_g > r.counters.n_hv, "each product costs one gradient");
}

#[test]
fn active_set_is_identified_near_the_solution() {
    let p = generate_random_qp(30, 3, 1e2).unwrap();
    let opt = p.known_optimum.clone().unwrap();
    let g_star = p.model.gradient(&opt.x);
    let nudge = DVector::from_fn(30, |i, _| 1e-7 * ((i % 5) as f64 - 2.0));
    let x = p.bounds.project(&(&opt.x + nudge)).unwrap();
    let g = p.model.gradient(&x);
    let part = estimate(&x, &g, &p.bounds, EpsilonState::new(1e-2).unwrap()).unwrap();
    for i in 0..30 {
        let expected = if opt.x[i] == p.bounds.lower()[i] && g_star[i] > 0.0 {
            IndexClass::LowerActive
        } else if opt.x[i] == p.bounds.upper()[i] && g_star[i] < 0.0 {
            IndexClass::UpperActive
        } else {
            IndexClass::Nonactive
        };
        assert_eq!(part.class(i), expected, "index {i}");
    }
}

#[test]
fn every_iterate_is_feasible() {
    for p in [
        builtin("rosenbrock", 10, 0).unwrap(),
        builtin("nonconvex-quad", 10, 2).unwrap(),
        builtin("qp-ill", 10, 4).unwrap(),
    ] {
        let mut feasible = true;
        solve_with_observer(&p, &SolverConfig::default(), &p.initial_point, &mut |e| match e {
            SolveEvent::Iterate { x, .. } => feasible &= p.bounds.is_feasible(x),
            SolveEvent::StageOne { x_tilde, .. } => feasible &= p.bounds.is_feasible(x_tilde),
            _ => {}
        })
        .unwrap();
        assert!(feasible, "{}", p.name);
    }
}

#[test]
fn repeated_solves_are_identical() {
    let p = builtin("qp-random", 25, 6).unwrap();
    let a = solve(&p, &SolverConfig::default(), &p.initial_point).unwrap();
    let b = solve(&p, &SolverConfig::default(), &p.initial_point).unwrap();
    assert!(a.same_outcome(&b));
}

#[test]
fn report_json_round_trips() {
    let p = builtin("rosenbrock", 4, 0).unwrap();
    let cfg = SolverConfig {
        trace: TraceLevel::Iterations,
        ..SolverConfig::default()
    };
    let r = solve(&p, &cfg, &p.initial_point).unwrap();
    let back = SolveReport::from_json(&r.to_json().unwrap()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn trace_has_one_row_per_iteration() {
    let p = builtin("qp-random", 12, 2).unwrap();
    let cfg = SolverConfig {
        trace: TraceLevel::Iterations,
        ..SolverConfig::default()
    };
    let r = solve(&p, &cfg, &p.initial_point).unwrap();
    let trace = r.trace.as_ref().unwrap();
    assert_eq!(trace.len(), r.iterations);
    let mut buf = Vec::new();
    write_trace_csv(trace, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), r.iterations + 1);
}

#[test]
fn budget_exhaustion_is_reported() {
    let p = builtin("rosenbrock", 10, 0).unwrap();
    let cfg = SolverConfig {
        max_fevals: 3,
        ..SolverConfig::default()
    };
    let r = solve(&p, &cfg, &p.initial_point).unwrap();
    assert_eq!(r.status, SolveStatus::MaxFevals);
}

#[test]
fn baseline_and_solver_agree_on_a_convex_qp() {
    let p = builtin("qp-random", 15, 1).unwrap();
    let a = solve(&p, &SolverConfig::default(), &p.initial_point).unwrap();
    let b = projected_gradient_solve(&p, &BaselineConfig::default(), &p.initial_point).unwrap();
    assert_eq!(a.status, SolveStatus::Converged);
    assert_eq!(b.status, SolveStatus::Converged);
    assert!(common::rel_err(a.f_final, b.f_final) <= 1e-6);
}

#[test]
fn suite_rows_are_ordered_and_profiles_are_monotone() {
    let problems: Vec<_> = (1..=4).map(|s| generate_random_qp(10, s, 1e2).unwrap()).collect();
    let opts = SuiteOptions {
        threads: Some(2),
        ..SuiteOptions::default()
    };
    let table = run_suite(&[SolverKind::AsaBcp, SolverKind::ProjectedGradient], &problems, &opts).unwrap();
    let order: Vec<(String, String)> = table
        .rows
        .iter()
        .map(|r| (r.problem.clone(), r.solver.clone()))
        .collect();
    let expected: Vec<(String, String)> = problems
        .iter()
        .flat_map(|p| ["asa-bcp", "pg"].map(|s| (p.name.clone(), s.to_string())))
        .collect();
    assert_eq!(order, expected);

    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    assert_eq!(MetricsTable::read_csv(buf.as_slice()).unwrap(), table);

    for metric in [ProfileMetric::Fevals, ProfileMetric::CgIters, ProfileMetric::Time] {
        let prof = performance_profile(&table, metric).unwrap();
        for c in &prof.curves {
            assert!(c.breakpoints.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
            assert!(c.breakpoints.iter().all(|&(_, rho)| (0.0..=1.0).contains(&rho)));
        }
    }
}
