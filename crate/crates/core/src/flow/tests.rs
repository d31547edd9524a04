use std::sync::Arc;

use super::*;
use crate::cmc::{newton_solve, ContinuationPlan};
use crate::exact::{boundary_cap, sphere_height_field};
use crate::exec::Execution;
use crate::grid::{Domain, HeightField};

fn domain() -> Domain {
    Domain::sphere(2, 1.0, 0.05)
}

fn cap(sigma: f64, nodes: usize) -> HeightField {
    let dom = domain();
    let grid = Arc::new(dom.grid(nodes).unwrap());
    sphere_height_field(&boundary_cap(&dom, sigma).unwrap(), grid).unwrap()
}

fn interior_sup(field: &HeightField, values: &[f64]) -> f64 {
    field
        .grid()
        .interior()
        .map(|i| values[i].abs())
        .fold(0.0, f64::max)
}

#[test]
fn rhs_vanishes_on_cap_at_second_order() {
    let coarse = cap(0.5, 100);
    let fine = cap(0.5, 200);
    let ec = interior_sup(&coarse, &rhs(&coarse, 0.5));
    let ef = interior_sup(&fine, &rhs(&fine, 0.5));
    assert!(ec < 1e-3, "{ec}");
    assert!(ec / ef > 3.5, "ratio {}", ec / ef);
}

#[test]
fn rhs_vanishes_on_horosphere_at_sigma_one() {
    let err = |nodes| {
        let grid = Arc::new(domain().grid(nodes).unwrap());
        let f = crate::exact::horosphere_field(0.05, grid).unwrap();
        interior_sup(&f, &rhs(&f, 1.0))
    };
    let (c, f) = (err(100), err(200));
    assert!(c < 1e-3);
    assert!(c / f > 3.5, "ratio {}", c / f);
}

#[test]
fn rhs_of_constant_height_is_minus_sigma_y() {
    let grid = Arc::new(domain().grid(50).unwrap());
    let f = HeightField::from_fn(grid.clone(), |_| 0.3).unwrap();
    let r = rhs(&f, 0.5);
    for i in grid.interior() {
        assert!((r[i] + 0.5 * grid.y(i)).abs() < 1e-14, "node {i}");
    }
    for i in grid.dirichlet_nodes() {
        assert_eq!(r[i], 0.0);
    }
}

#[test]
fn rhs_agrees_with_curvature_route() {
    let f = add_boundary_vanishing_bump(&cap(0.3, 80), 0.1);
    let a = rhs(&f, 0.3);
    let b = rhs_via_curvature(&f, 0.3).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn explicit_step_from_constant_height_descends_by_sigma_y_dt() {
    let grid = Arc::new(domain().grid(100).unwrap());
    let f = HeightField::from_fn(grid.clone(), |_| 0.0).unwrap();
    let dt = 0.5 * cfl_limit(&grid);
    let next = step_explicit(&f, 0.5, dt);
    for i in grid.interior() {
        let change = next.values()[i] - f.values()[i];
        assert!(change < 0.0);
        assert!(
            (change + 0.5 * grid.y(i) * dt).abs() < 1e-3 * dt,
            "node {i}"
        );
    }
}

#[test]
fn explicit_step_keeps_cap_nearly_fixed() {
    let f = cap(0.5, 200);
    let dt = 0.5 * cfl_limit(f.grid());
    let next = step_explicit(&f, 0.5, dt);
    let bound = 1e-12 + 10.0 * f.grid().h().powi(2) * dt;
    assert!(next.max_abs_diff(&f) < bound);
}

#[test]
fn cfl_step_respects_lower_bound() {
    let mut cfg = FlowConfig::new(0.5, domain(), 200);
    cfg.dt = DtPolicy::Cfl { safety: 0.5 };
    let grid = cfg.grid().unwrap();
    let dt = resolve_dt(&cfg, &grid).unwrap();
    let n = grid.n() as f64;
    assert!(dt >= n * grid.h().powi(2) * 0.5 / 2.0);
    assert!(dt <= cfl_limit(&grid));
}

#[test]
fn explicit_scheme_rejects_step_above_limit() {
    let mut cfg = FlowConfig::new(0.5, domain(), 200);
    cfg.scheme = Scheme::ExplicitRk2;
    cfg.dt = DtPolicy::Fixed { dt: 1e-2 };
    let v0 = cap(0.5, 200);
    assert!(matches!(
        run_to_stationarity(&cfg, &v0),
        Err(Error::CflViolation { .. })
    ));
}

#[test]
fn semi_implicit_fixes_discrete_stationary_solution() {
    let root = newton_solve(&cap(0.5, 200), 0.5, &ContinuationPlan::new(0.5)).unwrap();
    let next = step_semi_implicit(&root.field, 0.5, 1e-3).unwrap();
    assert!(next.max_abs_diff(&root.field) < 1e-10);
}

#[test]
fn schemes_agree_to_second_order_per_step() {
    let f = add_boundary_vanishing_bump(&cap(0.5, 100), 0.05);
    let limit = cfl_limit(f.grid());
    let gap = |dt: f64| {
        step_explicit(&f, 0.5, dt).max_abs_diff(&step_semi_implicit(&f, 0.5, dt).unwrap())
    };
    let (a, b) = (gap(0.5 * limit), gap(0.25 * limit));
    assert!(a / b > 3.5, "ratio {}", a / b);
}

#[test]
fn semi_implicit_stable_beyond_explicit_limit() {
    let v0 = add_boundary_vanishing_bump(&cap(0.5, 200), 0.05);
    let mut cfg = FlowConfig::new(0.5, domain(), 200);
    let dt = 10.0 * cfl_limit(v0.grid());
    cfg.dt = DtPolicy::Fixed { dt };
    cfg.diag_every = 20;
    cfg.t_max = 400.0 * dt;
    let out = run_to_stationarity(&cfg, &v0).unwrap();
    let residuals: Vec<f64> = out
        .trajectory
        .records
        .iter()
        .map(|r| r.residual_sup)
        .collect();
    assert!(residuals.iter().all(|r| r.is_finite()));
    for w in residuals.windows(2) {
        assert!(w[1] <= w[0], "{residuals:?}");
    }
}

#[test]
fn zero_time_budget_records_initial_state_only() {
    let v0 = add_boundary_vanishing_bump(&cap(0.5, 100), 0.05);
    let mut cfg = FlowConfig::new(0.5, domain(), 100);
    cfg.t_max = 0.0;
    let out = run_to_stationarity(&cfg, &v0).unwrap();
    assert_eq!(out.status, RunStatus::TimedOut);
    assert_eq!(out.trajectory.records.len(), 1);
    assert_eq!(out.final_state.step_count, 0);
}

#[test]
fn cap_is_converged_without_stepping() {
    let v0 = cap(0.5, 200);
    let mut cfg = FlowConfig::new(0.5, domain(), 200);
    cfg.residual_tol = 1e-3;
    let out = run_to_stationarity(&cfg, &v0).unwrap();
    assert_eq!(out.status, RunStatus::Converged);
    assert_eq!(out.final_state.step_count, 0);
}

#[test]
fn runs_are_bitwise_deterministic() {
    let v0 = add_boundary_vanishing_bump(&cap(0.5, 100), 0.05);
    let mut cfg = FlowConfig::new(0.5, domain(), 100);
    cfg.t_max = 0.5;
    let a = run_to_stationarity(&cfg, &v0).unwrap();
    let b = run_to_stationarity(&cfg, &v0).unwrap();
    let bits = |o: &RunOutcome| -> Vec<u64> {
        o.final_field()
            .values()
            .iter()
            .map(|x| x.to_bits())
            .collect()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(
        serde_json::to_string(&a.trajectory.records).unwrap(),
        serde_json::to_string(&b.trajectory.records).unwrap()
    );
}

#[test]
fn dirichlet_values_never_move() {
    let v0 = add_boundary_vanishing_bump(&cap(0.5, 100), 0.05);
    let mut cfg = FlowConfig::new(0.5, domain(), 100);
    cfg.t_max = 1.0;
    let out = run_to_stationarity(&cfg, &v0).unwrap();
    for i in v0.grid().dirichlet_nodes() {
        assert_eq!(
            out.final_field().values()[i].to_bits(),
            v0.values()[i].to_bits()
        );
    }
}

#[test]
fn non_finite_initial_data_is_an_error() {
    let mut v0 = cap(0.5, 100);
    v0.values_mut()[10] = f64::NAN;
    let cfg = FlowConfig::new(0.5, domain(), 100);
    assert!(run_to_stationarity(&cfg, &v0).is_err());
}

#[test]
fn initial_field_must_carry_boundary_data() {
    let mut v0 = cap(0.5, 100);
    let last = v0.grid().last();
    v0.values_mut()[last] += 0.1;
    let cfg = FlowConfig::new(0.5, domain(), 100);
    assert!(matches!(
        run_to_stationarity(&cfg, &v0),
        Err(Error::InvalidParameter { name: "v0", .. })
    ));
}

#[test]
fn continuation_validates_eps_list() {
    let cfg = FlowConfig::new(0.5, domain(), 50);
    for bad in [vec![], vec![0.1, 0.0], vec![0.05, 0.1], vec![0.1, 0.1]] {
        assert!(matches!(
            epsilon_continuation(&cfg, &bad, InitialShape::Cap, Execution::Sequential),
            Err(Error::InvalidParameter { .. })
        ));
    }
}

#[test]
fn single_eps_degenerates_to_one_run() {
    let mut cfg = FlowConfig::new(0.5, domain(), 50);
    cfg.residual_tol = 1e-3;
    let rep = epsilon_continuation(&cfg, &[0.1], InitialShape::Cap, Execution::Sequential).unwrap();
    assert_eq!(rep.entries.len(), 1);
    assert!(rep.entries[0].diff_to_previous.is_none());
    assert!(rep.diff_ratios.is_empty());
    assert_eq!(rep.w_spread, 1.0);
}

#[test]
fn continuation_is_independent_of_execution() {
    let mut cfg = FlowConfig::new(0.5, domain(), 60);
    cfg.t_max = 0.5;
    let shape = InitialShape::PerturbedCap { amplitude: 0.05 };
    let eps = [0.2, 0.1];
    let a = epsilon_continuation(&cfg, &eps, shape, Execution::Sequential).unwrap();
    let b = epsilon_continuation(&cfg, &eps, shape, Execution::Parallel).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}
