use std::sync::Arc;

use super::*;
use crate::exact::{boundary_cap, cap_height_field, radius_from_boundary, sphere_height_field};
use crate::geometry::mean_curvature;

fn domain(eps: f64) -> Domain {
    Domain::sphere(2, 1.0, eps)
}

fn cap(sigma: f64, eps: f64, nodes: usize) -> HeightField {
    let dom = domain(eps);
    let grid = Arc::new(dom.grid(nodes).unwrap());
    sphere_height_field(&boundary_cap(&dom, sigma).unwrap(), grid).unwrap()
}

fn sup(values: &[f64]) -> f64 {
    values.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

#[test]
fn residual_vanishes_on_horosphere_at_second_order() {
    // F carries a 1/y^2 factor near the lifted boundary; y^2 F is the flow speed up to n
    let err = |nodes| {
        let grid = Arc::new(domain(0.05).grid(nodes).unwrap());
        let r = cmc_residual(&horosphere_field(0.05, grid.clone()).unwrap(), 1.0);
        grid.interior()
            .map(|i| (grid.y(i).powi(2) * r[i]).abs())
            .fold(0.0, f64::max)
    };
    let (c, f) = (err(100), err(200));
    assert!(c / f > 3.5, "ratio {}", c / f);
}

#[test]
fn residual_vanishes_on_cap_at_second_order() {
    let (c, f) = (
        sup(&cmc_residual(&cap(0.5, 0.05, 100), 0.5)),
        sup(&cmc_residual(&cap(0.5, 0.05, 200), 0.5)),
    );
    assert!(c / f > 3.5, "ratio {}", c / f);
}

#[test]
fn residual_of_constant_height() {
    let grid = Arc::new(domain(0.05).grid(40).unwrap());
    let f = HeightField::from_fn(grid.clone(), |_| 0.2).unwrap();
    let r = cmc_residual(&f, 0.5);
    for i in grid.interior() {
        assert!((r[i] + 2.0 / grid.y(i) * 0.5).abs() < 1e-12, "node {i}");
    }
    for i in grid.dirichlet_nodes() {
        assert_eq!(r[i], 0.0);
    }
}

#[test]
fn analytic_jacobian_matches_finite_differences() {
    let f = cap(0.4, 0.1, 31);
    assert!(jacobian_fd_mismatch(&f, 0.4, 1e-6) < 1e-5);
    let grid = Arc::new(MeridianGrid::meridian(0.3, 1.2, 31).unwrap());
    let g = HeightField::from_fn(grid, |t: f64| 0.1 * t.sin() - 0.2).unwrap();
    assert!(jacobian_fd_mismatch(&g, 0.4, 1e-6) < 1e-5);
}

#[test]
fn newton_from_exact_cap_takes_at_most_two_iterations() {
    let out = newton_solve(&cap(0.5, 0.05, 200), 0.5, &ContinuationPlan::new(0.5)).unwrap();
    assert!(out.iterations <= 2, "{}", out.iterations);
}

#[test]
fn newton_from_horosphere_reaches_neighbouring_sigma() {
    let grid = Arc::new(domain(0.05).grid(200).unwrap());
    let start = horosphere_field(0.05, grid.clone()).unwrap();
    let out = newton_solve(&start, 0.95, &ContinuationPlan::new(0.95)).unwrap();
    let h = mean_curvature(&out.field).unwrap();
    let err = grid
        .interior()
        .map(|i| (h[i] - 0.95).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-6, "{err}");
}

#[test]
fn newton_converges_quadratically() {
    let start = add_bump(&cap(0.5, 0.05, 200), 0.02);
    let out = newton_solve(&start, 0.5, &ContinuationPlan::new(0.5)).unwrap();
    let e: Vec<f64> = out.history.iter().copied().filter(|r| *r > 1e-9).collect();
    assert!(e.len() >= 3, "{:?}", out.history);
    let k = e.len() - 3;
    let early = e[k + 1] / (e[k] * e[k]);
    let late = e[k + 2] / (e[k + 1] * e[k + 1]);
    assert!(
        late < 10.0 * early && late > 0.1 * early,
        "{:?}",
        out.history
    );
}

fn add_bump(field: &HeightField, amp: f64) -> HeightField {
    let grid = field.grid_arc().clone();
    let tb = grid.theta()[grid.last()];
    let v = field
        .values()
        .iter()
        .zip(grid.theta())
        .map(|(v, t)| v + amp * (std::f64::consts::PI * t / (2.0 * tb)).cos())
        .collect();
    HeightField::new(grid, v).unwrap()
}

#[test]
fn cold_start_may_fail_but_continuation_succeeds() {
    let dom = domain(0.05);
    let grid = Arc::new(dom.grid(200).unwrap());
    let mut v = vec![0.0; grid.len()];
    for (i, phi) in dom.boundary_values(&grid) {
        v[i] = phi;
    }
    let cold = HeightField::new(grid, v).unwrap();
    match newton_solve(&cold, 0.5, &ContinuationPlan::new(0.5)) {
        Ok(out) => assert!(out.residual < 1e-8),
        Err(e) => assert!(matches!(e, Error::NoConvergence { .. })),
    }
    let init = construct_initial(&dom, 0.5, 200, &ContinuationPlan::new(0.5)).unwrap();
    assert!(init.field.max_abs_diff(&cap(0.5, 0.05, 200)) < 1e-3);
}

#[test]
fn sigma_one_returns_horosphere() {
    let dom = domain(0.05);
    let init = construct_initial(&dom, 1.0, 100, &ContinuationPlan::new(1.0)).unwrap();
    assert!(init.log.is_empty());
    let grid = Arc::new(dom.grid(100).unwrap());
    assert_eq!(init.field, horosphere_field(0.05, grid).unwrap());
}

#[test]
fn initial_surface_is_the_cap_to_second_order() {
    let dom = domain(0.05);
    let diff = |nodes| {
        let init = construct_initial(&dom, 0.9, nodes, &ContinuationPlan::new(0.9)).unwrap();
        let grid = init.field.grid_arc().clone();
        let radius = radius_from_boundary(1.0, 0.9, 0.05).unwrap();
        init.field
            .max_abs_diff(&cap_height_field(radius, 0.9, grid).unwrap())
    };
    let (c, f) = (diff(200), diff(400));
    assert!(f < 1e-4, "{f}");
    assert!(c / f > 3.5, "ratio {}", c / f);
}

#[test]
fn initial_surface_passes_height_and_curvature_checks() {
    let dom = domain(0.05);
    let init = construct_initial(&dom, 0.9, 200, &ContinuationPlan::new(0.9)).unwrap();
    assert!(init.checks.heights_ok(), "{:?}", init.checks);
    assert!(init.checks.curvature_sandwich_ok(), "{:?}", init.checks);
    assert!(init.log.iter().all(|e| e.final_residual < 1e-9));
    assert_eq!(init.log.last().unwrap().sigma, 0.9);
}

#[test]
fn boundary_normal_approaches_sigma0_as_eps_shrinks() {
    let gaps: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&eps| {
            let init =
                construct_initial(&domain(eps), 0.9, 400, &ContinuationPlan::new(0.9)).unwrap();
            (init.checks.boundary_e_dot_nu - 0.9).abs()
        })
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn stalled_continuation_reports_last_sigma() {
    let plan = ContinuationPlan {
        max_newton_iters: 0,
        ..ContinuationPlan::new(0.5)
    };
    match construct_initial(&domain(0.05), 0.5, 100, &plan) {
        Err(Error::ContinuationFailed {
            last_sigma,
            min_step,
        }) => {
            assert_eq!(last_sigma, 1.0);
            assert_eq!(min_step, 1e-3);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn plan_rejects_bad_parameters() {
    assert!(ContinuationPlan::new(1.5).validate().is_err());
    let plan = ContinuationPlan {
        step: 0.0,
        ..ContinuationPlan::new(0.5)
    };
    assert!(plan.validate().is_err());
}

#[test]
fn log_rows_match_header() {
    let e = ContinuationLogEntry {
        sigma: 0.95,
        iters: 3,
        final_residual: 1e-13,
    };
    assert_eq!(ContinuationLogEntry::CSV_HEADER.split(',').count(), 3);
    assert_eq!(e.csv_row(), "0.95,3,1e-13");
}
