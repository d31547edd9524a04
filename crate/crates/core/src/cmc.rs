//! Stationary constant mean curvature graphs by damped Newton iteration with
//! continuation in `sigma` from the horosphere (`sigma = 1`).
//!
//! The discrete equation at an evolved node is
//!
//! ```text
//! F(v) = q / w^2 + (n - 1) cot(theta) p - (n / y) (sigma w - sin(theta) p) = 0
//! ```
//!
//! with `p`, `q` the central differences of `v`. The Jacobian is tridiagonal.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exact::horosphere_field;
use crate::geometry::{node_terms, stencil, PointwiseGeometry};
use crate::grid::{Boundary, Domain, HeightField, MeridianGrid, Topology};
use crate::tridiag::Tridiagonal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationPlan {
    pub sigma_start: f64,
    pub sigma_target: f64,
    pub step: f64,
    /// Smallest step the automatic halving may reach.
    pub min_step: f64,
    pub newton_tol: f64,
    /// Newton also stops once updates fall below this size (round-off floor).
    pub update_tol: f64,
    pub max_newton_iters: usize,
    pub max_halvings: usize,
}

impl ContinuationPlan {
    pub fn new(sigma_target: f64) -> Self {
        Self {
            sigma_start: 1.0,
            sigma_target,
            step: 0.05,
            min_step: 1e-3,
            newton_tol: 1e-12,
            update_tol: 1e-13,
            max_newton_iters: 30,
            max_halvings: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_target < self.sigma_start) && self.sigma_target != 1.0 {
            return Err(invalid("sigma_target", "must be below sigma_start"));
        }
        if !(self.sigma_target > -1.0 && self.sigma_target <= 1.0) {
            return Err(invalid("sigma_target", "sigma out of (-1,1]"));
        }
        if !(self.step > 0.0) || !(self.min_step > 0.0) {
            return Err(invalid("step", "continuation steps must be > 0"));
        }
        Ok(())
    }
}

/// Residual per node; Dirichlet nodes report zero.
pub fn cmc_residual(field: &HeightField, sigma: f64) -> Vec<f64> {
    let grid = field.grid();
    let v = field.values();
    (0..v.len())
        .map(|i| {
            if grid.is_dirichlet(i) {
                0.0
            } else {
                node_residual(grid, v, i, sigma)
            }
        })
        .collect()
}

#[inline]
fn node_residual(grid: &MeridianGrid, v: &[f64], i: usize, sigma: f64) -> f64 {
    let n = grid.n() as f64;
    let (p, q) = stencil(grid, v, i);
    let t = node_terms(grid, i, p, q);
    t.a_op - n / t.y * (sigma * t.w + t.e_dot_grad_v)
}

fn sup_norm(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Analytic Jacobian of [`cmc_residual`]; Dirichlet rows are identity rows.
pub fn cmc_jacobian(field: &HeightField, sigma: f64) -> Tridiagonal {
    let grid = field.grid();
    let v = field.values();
    let n = grid.n() as f64;
    let h = grid.h();
    let mut jac = Tridiagonal::zeros(v.len());
    for i in 0..v.len() {
        if grid.is_dirichlet(i) {
            jac.diag[i] = 1.0;
            continue;
        }
        let (p, q) = stencil(grid, v, i);
        let t = node_terms(grid, i, p, q);
        let w2 = t.w * t.w;
        if grid.topology() == Topology::Axisymmetric && i == 0 {
            // F_0 = (1/w^2 + n - 1) q_0 - n sigma w, q_0 = 2 (v_1 - v_0) / h^2, p_0 = 0
            let dq = (1.0 / w2 + n - 1.0) * 2.0 / (h * h);
            jac.diag[0] = -dq;
            jac.upper[0] = dq;
            continue;
        }
        let df_dq = 1.0 / w2;
        let df_dp = -2.0 * q * p / (w2 * w2) + t.cot_term - n / t.y * (sigma * p / t.w - t.sin);
        jac.lower[i] = df_dq / (h * h) - df_dp / (2.0 * h);
        jac.diag[i] = -2.0 * df_dq / (h * h);
        jac.upper[i] = df_dq / (h * h) + df_dp / (2.0 * h);
    }
    jac
}

/// Largest relative deviation between the analytic and a central finite-difference Jacobian.
pub fn jacobian_fd_mismatch(field: &HeightField, sigma: f64, delta: f64) -> f64 {
    let grid = field.grid();
    let jac = cmc_jacobian(field, sigma);
    let mut v = field.values().to_vec();
    let mut worst: f64 = 0.0;
    for j in 0..v.len() {
        if grid.is_dirichlet(j) {
            continue;
        }
        let orig = v[j];
        v[j] = orig + delta;
        let plus = cmc_residual(
            &HeightField::from_parts_unchecked(field.grid_arc().clone(), v.clone()),
            sigma,
        );
        v[j] = orig - delta;
        let minus = cmc_residual(
            &HeightField::from_parts_unchecked(field.grid_arc().clone(), v.clone()),
            sigma,
        );
        v[j] = orig;
        for i in j.saturating_sub(1)..(j + 2).min(v.len()) {
            if grid.is_dirichlet(i) {
                continue;
            }
            let fd = (plus[i] - minus[i]) / (2.0 * delta);
            let an = if i + 1 == j {
                jac.upper[i]
            } else if i == j {
                jac.diag[i]
            } else {
                jac.lower[i]
            };
            worst = worst.max((fd - an).abs() / (1.0 + an.abs()));
        }
    }
    worst
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub field: HeightField,
    pub iterations: usize,
    pub residual: f64,
    /// Sup-residual before each iteration and after the last one.
    pub history: Vec<f64>,
}

/// Damped Newton iteration for `cmc_residual(v, sigma) = 0`, keeping the
/// Dirichlet values of `v_init`.
pub fn newton_solve(
    v_init: &HeightField,
    sigma: f64,
    plan: &ContinuationPlan,
) -> Result<NewtonOutcome> {
    let grid = v_init.grid_arc().clone();
    let mut v = v_init.values().to_vec();
    let make = |v: &[f64]| HeightField::from_parts_unchecked(grid.clone(), v.to_vec());
    let mut field = make(&v);
    let mut f = cmc_residual(&field, sigma);
    let mut res = sup_norm(&f);
    let mut history = vec![res];
    for iter in 0..plan.max_newton_iters {
        if res < plan.newton_tol {
            return Ok(NewtonOutcome {
                field,
                iterations: iter,
                residual: res,
                history,
            });
        }
        let jac = cmc_jacobian(&field, sigma);
        let mut delta: Vec<f64> = f.iter().map(|x| -x).collect();
        jac.solve_in_place(&mut delta)
            .map_err(|_| Error::NoConvergence {
                iterations: iter,
                residual: res,
            })?;
        let step_size = sup_norm(&delta);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=plan.max_halvings {
            let trial: Vec<f64> = v.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            if trial.iter().all(|x| x.is_finite()) {
                let trial_field = make(&trial);
                let trial_f = cmc_residual(&trial_field, sigma);
                let trial_res = sup_norm(&trial_f);
                if trial_res < res {
                    accepted = Some((trial, trial_field, trial_f, trial_res));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let floor = plan.update_tol * (1.0 + sup_norm(&v));
        match accepted {
            Some((nv, nfield, nf, nres)) => {
                v = nv;
                field = nfield;
                f = nf;
                res = nres;
                history.push(res);
                if lambda * step_size < floor {
                    return Ok(NewtonOutcome {
                        field,
                        iterations: iter + 1,
                        residual: res,
                        history,
                    });
                }
            }
            // at the round-off floor no trial can lower the residual further
            None if step_size < floor => {
                return Ok(NewtonOutcome {
                    field,
                    iterations: iter,
                    residual: res,
                    history,
                })
            }
            None => {
                return Err(Error::NoConvergence {
                    iterations: iter + 1,
                    residual: res,
                })
            }
        }
    }
    if res < plan.newton_tol {
        Ok(NewtonOutcome {
            field,
            iterations: plan.max_newton_iters,
            residual: res,
            history,
        })
    } else {
        Err(Error::NoConvergence {
            iterations: plan.max_newton_iters,
            residual: res,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationLogEntry {
    pub sigma: f64,
    pub iters: usize,
    pub final_residual: f64,
}

impl ContinuationLogEntry {
    pub const CSV_HEADER: &'static str = "sigma,iters,final_residual";

    pub fn csv_row(&self) -> String {
        format!("{:?},{},{:?}", self.sigma, self.iters, self.final_residual)
    }
}

/// Height and slope bounds for a constructed initial surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialChecks {
    /// `(d/2) sqrt((1 - s0)/(1 + s0)) + eps - max u` (must be > 0).
    pub upper_height_slack: f64,
    /// `min over interior nodes of u - d(x') sqrt((1 - s0)/(1 + s0)) - s0 eps / (1 + s0)` (must be >= 0).
    pub lower_height_slack: f64,
    /// `e . nu_E` at the Dirichlet node(s), smallest value.
    pub boundary_e_dot_nu: f64,
    /// Euclidean mean curvature `(s0 - e . nu_E) / u` at the boundary node(s).
    pub boundary_euclidean_curvature: f64,
    /// Strict sandwich bounds for the boundary Euclidean curvature.
    pub euclidean_curvature_bounds: (f64, f64),
    /// Largest `1 / e . nu_E` over nodes with `u <= lambda s0 / sup H_E` (lambda = 1/2).
    pub slope_in_window: f64,
    /// `1 / ((1 - lambda) s0)` for lambda = 1/2; reported, not enforced.
    pub slope_bound: f64,
    pub sup_curvature_error: f64,
}

impl InitialChecks {
    pub fn heights_ok(&self) -> bool {
        self.upper_height_slack > 0.0 && self.lower_height_slack >= 0.0
    }

    pub fn curvature_sandwich_ok(&self) -> bool {
        let (lo, hi) = self.euclidean_curvature_bounds;
        lo < self.boundary_euclidean_curvature && self.boundary_euclidean_curvature < hi
    }
}

#[derive(Debug, Clone)]
pub struct InitialSurface {
    pub field: HeightField,
    pub sigma0: f64,
    pub log: Vec<ContinuationLogEntry>,
    pub checks: InitialChecks,
}

/// Solves the CMC-`sigma0` Dirichlet problem on `domain` by continuation from the horosphere.
pub fn construct_initial(
    domain: &Domain,
    sigma0: f64,
    nodes: usize,
    plan: &ContinuationPlan,
) -> Result<InitialSurface> {
    domain.validate()?;
    if !(sigma0 > -1.0 && sigma0 <= 1.0) {
        return Err(invalid("sigma0", "sigma0 out of (-1,1]"));
    }
    let plan = ContinuationPlan {
        sigma_target: sigma0,
        ..plan.clone()
    };
    plan.validate()?;
    let grid = Arc::new(domain.grid(nodes)?);
    let horosphere = horosphere_field(domain.eps, grid.clone())?;

    let mut log = Vec::new();
    let mut field = horosphere;
    if sigma0 < 1.0 {
        let coarse = Arc::new(domain.grid(21)?);
        let probe = horosphere_field(domain.eps, coarse)?;
        let mismatch = jacobian_fd_mismatch(&probe, sigma0, 1e-6);
        if mismatch > 1e-5 {
            return Err(Error::Refused(format!(
                "analytic Jacobian disagrees with finite differences ({mismatch:e})"
            )));
        }
    }
    let mut sigma = plan.sigma_start;
    let mut step = plan.step;
    while sigma > sigma0 {
        let trial_sigma = (sigma - step).max(sigma0);
        match newton_solve(&field, trial_sigma, &plan) {
            Ok(out) => {
                log.push(ContinuationLogEntry {
                    sigma: trial_sigma,
                    iters: out.iterations,
                    final_residual: out.residual,
                });
                field = out.field;
                sigma = trial_sigma;
                step = (2.0 * step).min(plan.step);
            }
            Err(Error::NoConvergence { .. }) => {
                step *= 0.5;
                if step < plan.min_step {
                    return Err(Error::ContinuationFailed {
                        last_sigma: sigma,
                        min_step: plan.min_step,
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }
    let checks = initial_checks(domain, &field, sigma0)?;
    Ok(InitialSurface {
        field,
        sigma0,
        log,
        checks,
    })
}

/// Evaluates the height, boundary-slope and curvature bounds for a CMC-`sigma0` graph.
pub fn initial_checks(domain: &Domain, field: &HeightField, sigma0: f64) -> Result<InitialChecks> {
    let geom = PointwiseGeometry::compute(field)?;
    let grid = field.grid();
    let eps = domain.eps;
    let half = 0.5 * domain.diameter();
    let ratio = ((1.0 - sigma0) / (1.0 + sigma0)).max(0.0).sqrt();

    let u_max = geom.u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let upper_height_slack = half * ratio + eps - u_max;

    let (left, right) = domain.boundary_points();
    let mut lower_height_slack = f64::INFINITY;
    for i in grid.interior() {
        let rho = field.values()[i].exp() * grid.theta()[i].sin();
        let dist = match domain.boundary {
            Boundary::Sphere { r } => r - rho.abs(),
            Boundary::Interval { .. } => (rho - left).min(right - rho),
        };
        let bound = dist * ratio + sigma0 * eps / (1.0 + sigma0);
        lower_height_slack = lower_height_slack.min(geom.u[i] - bound);
    }

    let dirichlet = grid.dirichlet_nodes();
    let boundary_e_dot_nu = dirichlet
        .iter()
        .map(|&i| geom.e_dot_nu_e[i])
        .fold(f64::INFINITY, f64::min);
    let h_euclid: Vec<f64> = dirichlet
        .iter()
        .map(|&i| (sigma0 - geom.e_dot_nu_e[i]) / geom.u[i])
        .collect();
    let boundary_euclidean_curvature = h_euclid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let root = (1.0 - sigma0 * sigma0).max(0.0).sqrt();
    let bounds = (
        -root / half - eps * (1.0 - sigma0) / (half * half),
        root / half + eps * (1.0 + sigma0) / (half * half),
    );

    let lambda = 0.5;
    let sup_h_euclid = boundary_euclidean_curvature;
    let level = if sup_h_euclid > 0.0 {
        lambda * sigma0 / sup_h_euclid
    } else {
        f64::INFINITY
    };
    let slope_in_window = (0..grid.len())
        .filter(|&i| geom.u[i] <= level)
        .map(|i| 1.0 / geom.e_dot_nu_e[i])
        .fold(f64::NEG_INFINITY, f64::max);

    let sup_curvature_error = grid
        .interior()
        .map(|i| (geom.h[i] - sigma0).abs())
        .fold(0.0, f64::max);

    Ok(InitialChecks {
        upper_height_slack,
        lower_height_slack,
        boundary_e_dot_nu,
        boundary_euclidean_curvature,
        euclidean_curvature_bounds: bounds,
        slope_in_window,
        slope_bound: 1.0 / ((1.0 - lambda) * sigma0),
        sup_curvature_error,
    })
}

#[cfg(test)]
mod tests;
