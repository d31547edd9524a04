//! Time stepping of the lifted Dirichlet problem
//!
//! ```text
//! v_t = y w (H - sigma) = (y^2 / n) a - y e.grad v - sigma y w   in the interior,
//! v   = phi^eps                                                 on the Dirichlet nodes.
//! ```

mod continuation;

pub use continuation::{epsilon_continuation, ContinuationEntry, ContinuationReport, InitialShape};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::measures::{
    dissipation_with, energy, gradient_quantity_with, DiagnosticsRecord,
};
use crate::error::{invalid, Error, Result};
use crate::geometry::{node_terms, stencil, PointwiseGeometry};
use crate::grid::{Domain, HeightField, MeridianGrid, Topology};
use crate::tridiag::Tridiagonal;

/// Steps during which nodes next to the Dirichlet data are left out of the residual.
pub const CORNER_GRACE_STEPS: usize = 10;
/// How many nodes next to each Dirichlet node the grace period covers.
pub const CORNER_GRACE_NODES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExplicitRk2,
    SemiImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum DtPolicy {
    Fixed {
        dt: f64,
    },
    /// `dt = safety * h^2 / (2 max_i y_i^2 / n)`.
    Cfl {
        safety: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub sigma: f64,
    pub domain: Domain,
    pub nodes: usize,
    pub scheme: Scheme,
    pub dt: DtPolicy,
    pub t_max: f64,
    /// Stationarity threshold on `sup |y w (H - sigma)|`.
    pub residual_tol: f64,
    pub diag_every: usize,
    /// Keep the field at every recorded row (needed by the offline checks).
    pub record_fields: bool,
}

impl FlowConfig {
    pub fn new(sigma: f64, domain: Domain, nodes: usize) -> Self {
        Self {
            sigma,
            domain,
            nodes,
            scheme: Scheme::SemiImplicit,
            dt: DtPolicy::Fixed { dt: 1e-3 },
            t_max: 50.0,
            residual_tol: 1e-6,
            diag_every: 100,
            record_fields: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > -1.0 && self.sigma < 1.0) {
            return Err(invalid("sigma", "sigma out of (-1,1)"));
        }
        self.domain.validate()?;
        if !(self.residual_tol > 0.0) {
            return Err(invalid("residual_tol", "must be > 0"));
        }
        if !(self.t_max >= 0.0) || !self.t_max.is_finite() {
            return Err(invalid("t_max", "must be finite and >= 0"));
        }
        if self.diag_every == 0 {
            return Err(invalid("diag_every", "must be >= 1"));
        }
        match self.dt {
            DtPolicy::Fixed { dt } if !(dt > 0.0) || !dt.is_finite() => {
                Err(invalid("dt", "time step must be > 0"))
            }
            DtPolicy::Cfl { safety } if !(safety > 0.0 && safety <= 1.0) => {
                Err(invalid("cfl_safety", "must lie in (0, 1]"))
            }
            _ => Ok(()),
        }
    }

    pub fn grid(&self) -> Result<MeridianGrid> {
        self.domain.grid(self.nodes)
    }
}

/// Explicit stability limit `h^2 / (2 max_i y_i^2 / n)` over the evolved nodes.
pub fn cfl_limit(grid: &MeridianGrid) -> f64 {
    let n = grid.n() as f64;
    let d_max = grid
        .interior()
        .map(|i| grid.y(i).powi(2) / n)
        .fold(0.0, f64::max);
    grid.h().powi(2) / (2.0 * d_max)
}

/// Flow speed `v_t` per node; zero on Dirichlet nodes.
pub fn rhs(field: &HeightField, sigma: f64) -> Vec<f64> {
    let grid = field.grid();
    let v = field.values();
    let n = grid.n() as f64;
    (0..v.len())
        .map(|i| {
            if grid.is_dirichlet(i) {
                return 0.0;
            }
            let (p, q) = stencil(grid, v, i);
            let t = node_terms(grid, i, p, q);
            t.y * t.y * t.a_op / n - t.y * t.e_dot_grad_v - sigma * t.y * t.w
        })
        .collect()
}

/// `y w (H - sigma)` assembled from the mean curvature route.
pub fn rhs_via_curvature(field: &HeightField, sigma: f64) -> Result<Vec<f64>> {
    let geom = PointwiseGeometry::compute(field)?;
    let grid = field.grid();
    Ok((0..geom.len())
        .map(|i| {
            if grid.is_dirichlet(i) {
                0.0
            } else {
                grid.y(i) * geom.w[i] * (geom.h[i] - sigma)
            }
        })
        .collect())
}

fn check_finite(field: &HeightField, step: usize, t: f64, last_good: &HeightField) -> Result<()> {
    if field.values().iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            step,
            t,
            last_good: Box::new(last_good.clone()),
        })
    }
}

/// One Heun (two-stage RK2) step. Dirichlet nodes are untouched.
pub fn step_explicit(field: &HeightField, sigma: f64, dt: f64) -> HeightField {
    let k1 = rhs(field, sigma);
    let mut stage: Vec<f64> = field
        .values()
        .iter()
        .zip(&k1)
        .map(|(v, k)| v + dt * k)
        .collect();
    let stage_field = HeightField::from_parts_unchecked(field.grid_arc().clone(), stage.clone());
    let k2 = rhs(&stage_field, sigma);
    for (i, s) in stage.iter_mut().enumerate() {
        *s = field.values()[i] + 0.5 * dt * (k1[i] + k2[i]);
    }
    HeightField::from_parts_unchecked(field.grid_arc().clone(), stage)
}

/// Frozen-coefficient linearization of the flow at `field`:
/// `(I - dt L) v^{k+1} = v^k - dt sigma y w^k`, with identity Dirichlet rows.
pub fn semi_implicit_system(field: &HeightField, sigma: f64, dt: f64) -> (Tridiagonal, Vec<f64>) {
    let grid = field.grid();
    let v = field.values();
    let len = v.len();
    let n = grid.n() as f64;
    let h = grid.h();
    let mut a = Tridiagonal::zeros(len);
    let mut b = v.to_vec();
    #[allow(clippy::needless_range_loop)]
    for i in 0..len {
        if grid.is_dirichlet(i) {
            a.diag[i] = 1.0;
            continue;
        }
        let (p, q) = stencil(grid, v, i);
        let t = node_terms(grid, i, p, q);
        let y2n = t.y * t.y / n;
        b[i] -= dt * sigma * t.y * t.w;
        if grid.topology() == Topology::Axisymmetric && i == 0 {
            // pole: v_t = alpha * 2 (v1 - v0) / h^2 after the ghost reflection
            let alpha = y2n * (1.0 / (t.w * t.w) + (n - 1.0));
            let k = 2.0 * dt * alpha / (h * h);
            a.diag[0] = 1.0 + k;
            a.upper[0] = -k;
            continue;
        }
        let alpha = y2n / (t.w * t.w);
        let beta = y2n * t.cot_term + t.y * t.sin;
        let diffusion = dt * alpha / (h * h);
        let advection = dt * beta / (2.0 * h);
        a.lower[i] = -(diffusion - advection);
        a.diag[i] = 1.0 + 2.0 * diffusion;
        a.upper[i] = -(diffusion + advection);
    }
    (a, b)
}

/// One semi-implicit step. The linear system is diagonally dominant whenever
/// `dt * (|beta_i| / h - 2 alpha_i / h^2) <= 1` at every row, which holds for
/// any `dt` once `h <= 2 alpha_i / |beta_i|`; a violation is reported as
/// [`Error::SingularSystem`] together with the offending field.
pub fn step_semi_implicit(field: &HeightField, sigma: f64, dt: f64) -> Result<HeightField> {
    let (a, mut b) = semi_implicit_system(field, sigma, dt);
    let fail = |row| Error::SingularSystem {
        row,
        snapshot: Box::new(field.clone()),
    };
    if let Some(row) = a.dominance_violation() {
        return Err(fail(row));
    }
    a.solve_in_place(&mut b).map_err(fail)?;
    Ok(HeightField::from_parts_unchecked(
        field.grid_arc().clone(),
        b,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    TimedOut,
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub field: HeightField,
    pub step_count: usize,
    pub last_diagnostics: DiagnosticsRecord,
}

/// Recorded history of one run; every offline check consumes this.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Arc<MeridianGrid>,
    pub sigma: f64,
    pub domain: Domain,
    pub records: Vec<DiagnosticsRecord>,
    /// Field values at each record, when `record_fields` was set.
    pub fields: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn field_at(&self, k: usize) -> HeightField {
        HeightField::from_parts_unchecked(self.grid.clone(), self.fields[k].clone())
    }

    pub fn initial_field(&self) -> Option<HeightField> {
        (!self.fields.is_empty()).then(|| self.field_at(0))
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub final_state: FlowState,
    pub trajectory: Trajectory,
    pub dt: f64,
}

impl RunOutcome {
    pub fn final_field(&self) -> &HeightField {
        &self.final_state.field
    }
}

/// Per-step monitor: turns fields into diagnostics rows and aggregates extrema between rows.
struct Monitor {
    sigma: f64,
    prev_energy: f64,
    prev_dissipation: f64,
    dissipation_integral: f64,
    window_min_increment: Option<f64>,
    window_energy_rise: Option<f64>,
    window_w_interior: f64,
    window_g_interior: f64,
    window_g_boundary: f64,
    window_w_boundary: f64,
    window_w_scaled: f64,
    window_u: f64,
}

impl Monitor {
    fn new(sigma: f64) -> Self {
        Self {
            sigma,
            prev_energy: f64::NAN,
            prev_dissipation: f64::NAN,
            dissipation_integral: 0.0,
            window_min_increment: None,
            window_energy_rise: None,
            window_w_interior: f64::NEG_INFINITY,
            window_g_interior: f64::NEG_INFINITY,
            window_g_boundary: f64::NEG_INFINITY,
            window_w_boundary: f64::NEG_INFINITY,
            window_w_scaled: f64::NEG_INFINITY,
            window_u: f64::NEG_INFINITY,
        }
    }

    /// Measures `field` at `step`; `previous` is the field one step earlier.
    fn observe(
        &mut self,
        field: &HeightField,
        previous: Option<&HeightField>,
        step: usize,
        t: f64,
        dt: f64,
    ) -> Result<DiagnosticsRecord> {
        let grid = field.grid();
        let geom = PointwiseGeometry::compute(field)?;
        let energy = energy(field, self.sigma);
        let dissipation = dissipation_with(field, &geom, self.sigma);
        let g = gradient_quantity_with(field, &geom, self.sigma);
        let v = field.values();

        if let Some(prev) = previous {
            self.dissipation_integral += 0.5 * dt * (self.prev_dissipation + dissipation);
            let rise = energy - self.prev_energy;
            self.window_energy_rise = Some(self.window_energy_rise.map_or(rise, |m| m.max(rise)));
            let inc = grid
                .interior()
                .map(|i| v[i] - prev.values()[i])
                .fold(f64::INFINITY, f64::min);
            self.window_min_increment = Some(self.window_min_increment.map_or(inc, |m| m.min(inc)));
        }
        self.prev_energy = energy;
        self.prev_dissipation = dissipation;

        let mut residual: f64 = 0.0;
        let mut w_interior = f64::NEG_INFINITY;
        let mut g_interior = f64::NEG_INFINITY;
        let mut g_boundary = f64::NEG_INFINITY;
        let mut w_boundary = f64::NEG_INFINITY;
        let mut u_min_interior = f64::INFINITY;
        let y_w_h: Vec<f64> = (0..v.len())
            .map(|i| grid.y(i) * geom.w[i] * (geom.h[i] - self.sigma))
            .collect();
        for i in 0..v.len() {
            if grid.is_dirichlet(i) {
                g_boundary = g_boundary.max(g[i]);
                w_boundary = w_boundary.max(geom.w[i]);
                continue;
            }
            let in_grace =
                step < CORNER_GRACE_STEPS && grid.nodes_from_boundary(i) <= CORNER_GRACE_NODES;
            if !in_grace {
                residual = residual.max(y_w_h[i].abs());
            }
            w_interior = w_interior.max(geom.w[i]);
            g_interior = g_interior.max(g[i]);
            u_min_interior = u_min_interior.min(geom.u[i]);
        }
        self.window_w_interior = self.window_w_interior.max(w_interior);
        self.window_g_interior = self.window_g_interior.max(g_interior);
        self.window_g_boundary = self.window_g_boundary.max(g_boundary);
        self.window_w_boundary = self.window_w_boundary.max(w_boundary);
        self.window_w_scaled = self.window_w_scaled.max(w_interior * (-3.0 * t).exp());
        let u_max = geom.u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.window_u = self.window_u.max(u_max);

        let fold_max = |xs: &[f64]| xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let fold_min = |xs: &[f64]| xs.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(DiagnosticsRecord {
            step,
            t,
            energy,
            dissipation,
            residual_sup: residual,
            w_max: geom.w_max(),
            g_max: fold_max(&g),
            u_max,
            u_min_interior,
            v_min: fold_min(v),
            v_max: fold_max(v),
            monotone_flag: self.window_min_increment,
            energy_rise_max: self.window_energy_rise,
            dissipation_integral: self.dissipation_integral,
            w_interior_max: self.window_w_interior,
            g_interior_max: self.window_g_interior,
            g_boundary_max: self.window_g_boundary,
            w_boundary_max: self.window_w_boundary,
            w_interior_scaled_max: self.window_w_scaled,
            u_window_max: self.window_u,
        })
    }

    fn reset_window(&mut self) {
        self.window_min_increment = None;
        self.window_energy_rise = None;
        self.window_w_interior = f64::NEG_INFINITY;
        self.window_g_interior = f64::NEG_INFINITY;
        self.window_g_boundary = f64::NEG_INFINITY;
        self.window_w_boundary = f64::NEG_INFINITY;
        self.window_w_scaled = f64::NEG_INFINITY;
        self.window_u = f64::NEG_INFINITY;
    }
}

/// Resolves the time step for `config` on `grid`, enforcing the explicit limit for RK2.
pub fn resolve_dt(config: &FlowConfig, grid: &MeridianGrid) -> Result<f64> {
    let limit = cfl_limit(grid);
    match (config.dt, config.scheme) {
        (DtPolicy::Cfl { safety }, _) => Ok(safety * limit),
        (DtPolicy::Fixed { dt }, Scheme::ExplicitRk2) if dt > limit => {
            Err(Error::CflViolation { dt, limit })
        }
        (DtPolicy::Fixed { dt }, _) => Ok(dt),
    }
}

/// Checks that `v0` lives on the configured grid and carries the Dirichlet data.
pub fn check_initial(config: &FlowConfig, v0: &HeightField) -> Result<()> {
    let grid = config.grid()?;
    if v0.grid() != &grid {
        return Err(invalid(
            "v0",
            "initial field is not defined on the configured grid",
        ));
    }
    for (i, phi) in config.domain.boundary_values(&grid) {
        let got = v0.values()[i];
        if (got - phi).abs() > 1e-12 * (1.0 + phi.abs()) {
            return Err(invalid(
                "v0",
                format!("node {i} holds {got}, Dirichlet value is {phi}"),
            ));
        }
    }
    Ok(())
}

pub fn run_to_stationarity(config: &FlowConfig, v0: &HeightField) -> Result<RunOutcome> {
    run_with_observer(config, v0, |_| {})
}

/// Runs until `sup |y w (H - sigma)| < residual_tol` or `t >= t_max`.
///
/// `observer` sees the state after every step (and once for the initial state).
pub fn run_with_observer(
    config: &FlowConfig,
    v0: &HeightField,
    mut observer: impl FnMut(&FlowState),
) -> Result<RunOutcome> {
    config.validate()?;
    check_initial(config, v0)?;
    let grid = v0.grid_arc().clone();
    let dt = resolve_dt(config, &grid)?;
    let sigma = config.sigma;

    let mut monitor = Monitor::new(sigma);
    let mut trajectory = Trajectory {
        grid: grid.clone(),
        sigma,
        domain: config.domain,
        records: Vec::new(),
        fields: Vec::new(),
    };
    let initial = monitor.observe(v0, None, 0, 0.0, dt)?;
    trajectory.records.push(initial.clone());
    if config.record_fields {
        trajectory.fields.push(v0.values().to_vec());
    }
    monitor.reset_window();

    let mut state = FlowState {
        t: 0.0,
        field: v0.clone(),
        step_count: 0,
        last_diagnostics: initial,
    };
    observer(&state);

    let steps_total = (config.t_max / dt - 1e-9).ceil().max(0.0) as usize;
    let mut status = if state.last_diagnostics.residual_sup < config.residual_tol {
        RunStatus::Converged
    } else {
        RunStatus::TimedOut
    };

    while status == RunStatus::TimedOut && state.step_count < steps_total {
        let next = match config.scheme {
            Scheme::ExplicitRk2 => step_explicit(&state.field, sigma, dt),
            Scheme::SemiImplicit => step_semi_implicit(&state.field, sigma, dt)?,
        };
        let step = state.step_count + 1;
        let t = step as f64 * dt;
        check_finite(&next, step, t, &state.field)?;
        let measured = monitor.observe(&next, Some(&state.field), step, t, dt)?;
        if !measured.is_finite() {
            return Err(Error::NonFinite {
                step,
                t,
                last_good: Box::new(state.field.clone()),
            });
        }
        let converged = measured.residual_sup < config.residual_tol;
        let last = converged || step == steps_total;
        if step.is_multiple_of(config.diag_every) || last {
            if cfg!(debug_assertions) {
                debug_cross_check(&next, sigma);
            }
            trajectory.records.push(measured.clone());
            if config.record_fields {
                trajectory.fields.push(next.values().to_vec());
            }
            monitor.reset_window();
        }
        state = FlowState {
            t,
            field: next,
            step_count: step,
            last_diagnostics: measured,
        };
        observer(&state);
        if converged {
            status = RunStatus::Converged;
        }
    }

    Ok(RunOutcome {
        status,
        final_state: state,
        trajectory,
        dt,
    })
}

fn debug_cross_check(field: &HeightField, sigma: f64) {
    let a = rhs(field, sigma);
    let b = rhs_via_curvature(field, sigma).expect("grid already validated");
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        debug_assert!(
            (x - y).abs() <= 1e-12 * (1.0 + x.abs().max(y.abs())),
            "rhs routes disagree at node {i}: {x} vs {y}"
        );
    }
}

/// `v0 + amplitude * cos(pi * dist / (2 * half_width))`, vanishing on the Dirichlet nodes.
///
/// On axisymmetric grids the bump is `cos(pi theta / (2 theta_b))`; on meridian
/// grids it is centred between the two ends.
pub fn add_boundary_vanishing_bump(field: &HeightField, amplitude: f64) -> HeightField {
    let grid = field.grid();
    let theta = grid.theta();
    let (lo, hi) = (theta[0], theta[grid.last()]);
    let mut v = field.values().to_vec();
    for (i, x) in v.iter_mut().enumerate() {
        let bump = match grid.topology() {
            Topology::Axisymmetric => (std::f64::consts::PI * theta[i] / (2.0 * hi)).cos(),
            Topology::Meridian => {
                let mid = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo);
                (std::f64::consts::PI * (theta[i] - mid) / (2.0 * half)).cos()
            }
        };
        if !grid.is_dirichlet(i) {
            *x += amplitude * bump;
        }
    }
    HeightField::from_parts_unchecked(field.grid_arc().clone(), v)
}

#[cfg(test)]
mod tests;
