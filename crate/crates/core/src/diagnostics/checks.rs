//! Invariant checks over recorded trajectories.
//!
//! Every check is a pure function of a [`Trajectory`] (or of final fields) and
//! returns a [`CheckOutcome`]. Per-step quantities come from the window
//! aggregates stored in each record, so steps between records are covered too.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::EquidistanceSphere;
use crate::flow::Trajectory;
use crate::geometry::{embed, mean_curvature};
use crate::grid::{HeightField, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckStatus {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    #[serde(rename = "warn")]
    Warn,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl CheckStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Warn => "warn",
            CheckStatus::NotApplicable => "n/a",
        }
    }

    fn hard(ok: bool) -> Self {
        if ok {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: String,
    pub status: CheckStatus,
    pub measured: f64,
    pub bound: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl CheckOutcome {
    pub fn new(check: impl Into<String>, status: CheckStatus, measured: f64, bound: f64) -> Self {
        Self {
            check: check.into(),
            status,
            measured,
            bound,
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.status != CheckStatus::Fail
    }
}

/// Serializable list of outcomes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerificationReport {
    pub fn push(&mut self, outcome: CheckOutcome) {
        self.checks.push(outcome);
    }

    pub fn extend(&mut self, outcomes: impl IntoIterator<Item = CheckOutcome>) {
        self.checks.extend(outcomes);
    }

    /// True when no check failed; warnings and n/a do not count.
    pub fn all_hard_pass(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.checks).expect("report serializes")
    }
}

const ENERGY_STEP_TOL: f64 = 1e-10;

/// (a) `I` never rises by more than `1e-10` in one step; (b) `|dI + int D dt| <= balance_tol |dI|`.
pub fn check_energy_balance(traj: &Trajectory, balance_tol: f64) -> Vec<CheckOutcome> {
    let mut worst_rise = f64::NEG_INFINITY;
    let mut worst_step = 0;
    for r in &traj.records {
        if let Some(rise) = r.energy_rise_max {
            if rise > worst_rise {
                worst_rise = rise;
                worst_step = r.step;
            }
        }
    }
    let descent = if worst_rise == f64::NEG_INFINITY {
        CheckOutcome::new("energy_descent", CheckStatus::Pass, 0.0, ENERGY_STEP_TOL)
            .with_detail("no steps taken")
    } else {
        CheckOutcome::new(
            "energy_descent",
            CheckStatus::hard(worst_rise <= ENERGY_STEP_TOL),
            worst_rise,
            ENERGY_STEP_TOL,
        )
        .with_detail(format!(
            "largest single-step rise in the window ending at step {worst_step}"
        ))
    };

    let (first, last) = match (traj.records.first(), traj.records.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return vec![
                descent,
                CheckOutcome::new(
                    "energy_balance",
                    CheckStatus::NotApplicable,
                    0.0,
                    balance_tol,
                ),
            ]
        }
    };
    let drop = last.energy - first.energy;
    let defect = (drop + last.dissipation_integral).abs();
    let balance = if drop.abs() < ENERGY_STEP_TOL {
        CheckOutcome::new(
            "energy_balance",
            CheckStatus::hard(defect <= ENERGY_STEP_TOL),
            defect,
            ENERGY_STEP_TOL,
        )
        .with_detail("stationary run: absolute defect")
    } else {
        let rel = defect / drop.abs();
        CheckOutcome::new(
            "energy_balance",
            CheckStatus::hard(rel <= balance_tol),
            rel,
            balance_tol,
        )
        .with_detail(format!(
            "dI = {drop:e}, int D dt = {:e}",
            last.dissipation_integral
        ))
    };
    vec![descent, balance]
}

const GRADIENT_TOL: f64 = 1e-8;

/// Interior space-time max of `G` against its parabolic-boundary max.
pub fn check_gradient_quantity(traj: &Trajectory) -> CheckOutcome {
    let Some(first) = traj.records.first() else {
        return CheckOutcome::new("gradient_quantity", CheckStatus::NotApplicable, 0.0, 0.0);
    };
    let boundary = traj
        .records
        .iter()
        .map(|r| r.g_boundary_max)
        .fold(first.g_max, f64::max);
    let interior = traj
        .records
        .iter()
        .map(|r| r.g_interior_max)
        .fold(f64::NEG_INFINITY, f64::max);
    CheckOutcome::new(
        "gradient_quantity",
        CheckStatus::hard(interior <= boundary + GRADIENT_TOL),
        interior,
        boundary + GRADIENT_TOL,
    )
}

const MONOTONE_TOL: f64 = 1e-10;

/// Pointwise non-decrease in time, applicable only when `min(H_0 - sigma) >= 0`.
pub fn check_monotone(traj: &Trajectory, initial_h_minus_sigma_min: f64) -> CheckOutcome {
    let min_inc = traj
        .records
        .iter()
        .filter_map(|r| r.monotone_flag)
        .fold(f64::INFINITY, f64::min);
    if initial_h_minus_sigma_min < 0.0 {
        return CheckOutcome::new(
            "monotone",
            CheckStatus::NotApplicable,
            min_inc,
            -MONOTONE_TOL,
        )
        .with_detail(format!("min(H0 - sigma) = {initial_h_minus_sigma_min:e}"));
    }
    CheckOutcome::new(
        "monotone",
        CheckStatus::hard(min_inc >= -MONOTONE_TOL),
        min_inc,
        -MONOTONE_TOL,
    )
}

/// `u < (d/2) sqrt((1 - sigma)/(1 + sigma)) + eps` at every step; `measured` is the largest `u`.
///
/// The estimate propagates a bound the initial surface already satisfies, so a
/// run whose initial record lies above it is reported as not applicable.
pub fn check_height_bound(traj: &Trajectory) -> CheckOutcome {
    let sigma = traj.sigma;
    let bound =
        0.5 * traj.domain.diameter() * ((1.0 - sigma) / (1.0 + sigma)).sqrt() + traj.domain.eps;
    let u_max = traj
        .records
        .iter()
        .map(|r| r.u_max.max(r.u_window_max))
        .fold(f64::NEG_INFINITY, f64::max);
    if let Some(first) = traj.records.first() {
        if first.u_max >= bound {
            return CheckOutcome::new("height_bound", CheckStatus::NotApplicable, u_max, bound)
                .with_detail(format!(
                    "initial surface already reaches u = {}",
                    first.u_max
                ));
        }
    }
    CheckOutcome::new(
        "height_bound",
        CheckStatus::hard(u_max < bound),
        u_max,
        bound,
    )
    .with_detail(format!("slack {:e}", bound - u_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Inside,
    Outside,
}

/// Keeps every recorded embedded profile on the declared side of `sphere`, up to `tol`.
///
/// `measured` is the worst signed violation (`<= tol` passes).
pub fn check_barrier_containment(
    traj: &Trajectory,
    sphere: &EquidistanceSphere,
    side: Side,
    tol: f64,
) -> Result<CheckOutcome> {
    if traj.fields.is_empty() {
        return Err(Error::Refused(
            "barrier containment needs recorded fields".into(),
        ));
    }
    let mut worst = f64::NEG_INFINITY;
    for k in 0..traj.fields.len() {
        for p in embed(&traj.field_at(k)) {
            let d = sphere.signed_distance(p);
            let violation = match side {
                Side::Inside => d,
                Side::Outside => -d,
            };
            worst = worst.max(violation);
        }
    }
    let name = match side {
        Side::Inside => "barrier_inside",
        Side::Outside => "barrier_outside",
    };
    Ok(CheckOutcome::new(
        name,
        CheckStatus::hard(worst <= tol),
        worst,
        tol,
    ))
}

const W_GROWTH_SLACK: f64 = 1.05;

/// `max_interior w(t) <= e^{3t} max_parabolic_boundary w`, with 5% slack.
///
/// `measured` is the largest ratio of `e^{-3t} max_interior w(t)` to the boundary max seen so far.
pub fn check_w_growth(traj: &Trajectory) -> CheckOutcome {
    let Some(first) = traj.records.first() else {
        return CheckOutcome::new("w_growth", CheckStatus::NotApplicable, 0.0, W_GROWTH_SLACK);
    };
    let mut boundary = first.w_max;
    let mut ratio = f64::NEG_INFINITY;
    for r in &traj.records {
        boundary = boundary.max(r.w_boundary_max);
        ratio = ratio.max(r.w_interior_scaled_max / boundary);
    }
    CheckOutcome::new(
        "w_growth",
        CheckStatus::hard(ratio <= W_GROWTH_SLACK),
        ratio,
        W_GROWTH_SLACK,
    )
}

/// Nodes nearest the boundary left out of the asymptotics fit (besides the boundary node).
pub const FIT_EXCLUDED_NODES: usize = 3;
pub const FIT_MIN_POINTS: usize = 6;
/// Differences below this are treated as round-off.
pub const FIT_NOISE_FLOOR: f64 = 1e-11;
pub const FIT_EXPONENT_THRESHOLD: f64 = 1.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AsymptoticsFit {
    Exponent { slope: f64, points: usize },
    BelowNoiseFloor { max_difference: f64 },
}

/// Least-squares slope of `log |v - eta|` against `log(theta_end - theta)` near the last node.
///
/// The window is the quarter of the grid nearest the end node, minus the end node and the
/// [`FIT_EXCLUDED_NODES`] next to it. Fewer than [`FIT_MIN_POINTS`] points is refused.
pub fn boundary_asymptotics_fit(field: &HeightField, eta: &HeightField) -> Result<AsymptoticsFit> {
    let grid = field.grid();
    if eta.grid() != grid {
        return Err(Error::Refused("fields live on different grids".into()));
    }
    let last = grid.last();
    let theta = grid.theta();
    let quarter = grid.len() / 4;
    let lo = last.saturating_sub(quarter);
    let hi = last.saturating_sub(FIT_EXCLUDED_NODES + 1);
    let window: Vec<usize> = if hi >= lo {
        (lo..=hi).collect()
    } else {
        Vec::new()
    };
    if window.len() < FIT_MIN_POINTS {
        return Err(Error::Refused(format!(
            "asymptotics window has {} points, at least {FIT_MIN_POINTS} needed",
            window.len()
        )));
    }
    let diffs: Vec<f64> = window
        .iter()
        .map(|&i| (field.values()[i] - eta.values()[i]).abs())
        .collect();
    let max_difference = diffs.iter().copied().fold(0.0, f64::max);
    if diffs.iter().any(|d| *d < FIT_NOISE_FLOOR) {
        return Ok(AsymptoticsFit::BelowNoiseFloor { max_difference });
    }
    let xs: Vec<f64> = window
        .iter()
        .map(|&i| (theta[last] - theta[i]).ln())
        .collect();
    let ys: Vec<f64> = diffs.iter().map(|d| d.ln()).collect();
    let m = xs.len() as f64;
    let (sx, sy) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - sx) * (y - sy);
        sxx += (x - sx) * (x - sx);
    }
    Ok(AsymptoticsFit::Exponent {
        slope: sxy / sxx,
        points: window.len(),
    })
}

/// Soft check around [`boundary_asymptotics_fit`]: low exponents warn, never fail.
pub fn check_boundary_asymptotics(field: &HeightField, eta: &HeightField) -> CheckOutcome {
    let name = "boundary_asymptotics";
    match boundary_asymptotics_fit(field, eta) {
        Ok(AsymptoticsFit::Exponent { slope, points }) => {
            let status = if slope >= FIT_EXPONENT_THRESHOLD {
                CheckStatus::Pass
            } else {
                CheckStatus::Warn
            };
            CheckOutcome::new(name, status, slope, FIT_EXPONENT_THRESHOLD)
                .with_detail(format!("{points} points"))
        }
        Ok(AsymptoticsFit::BelowNoiseFloor { max_difference }) => CheckOutcome::new(
            name,
            CheckStatus::NotApplicable,
            max_difference,
            FIT_NOISE_FLOOR,
        )
        .with_detail("difference below noise floor, fit skipped"),
        Err(e) => CheckOutcome::new(
            name,
            CheckStatus::NotApplicable,
            f64::NAN,
            FIT_EXPONENT_THRESHOLD,
        )
        .with_detail(e.to_string()),
    }
}

/// Sup over nodes `1..last` of `|d/dtheta(s y^{-n} v_theta / w) - n H y^{-(n+1)} s|`, `s = sin^{n-1}`.
///
/// The flux is taken at half nodes, so the defect is `O(h^2)` on smooth fields.
pub fn divergence_identity_defect(field: &HeightField) -> Result<f64> {
    let grid = field.grid();
    let h_curv = mean_curvature(field)?;
    let n = grid.n() as i32;
    let theta = grid.theta();
    let v = field.values();
    let h = grid.h();
    let weight = |t: f64| match grid.topology() {
        Topology::Axisymmetric => t.sin().powi(n - 1),
        Topology::Meridian => 1.0,
    };
    let flux = |i: usize| {
        let mid = 0.5 * (theta[i] + theta[i + 1]);
        let p = (v[i + 1] - v[i]) / h;
        weight(mid) * mid.cos().powi(-n) * p / (1.0 + p * p).sqrt()
    };
    let mut worst: f64 = 0.0;
    for i in 1..grid.last() {
        let lhs = (flux(i) - flux(i - 1)) / h;
        let rhs = n as f64 * h_curv[i] * theta[i].cos().powi(-(n + 1)) * weight(theta[i]);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}
