//! The acceptance matrix as runnable suites.
//!
//! `oracles` compares discrete geometry with closed-form surfaces; `flow` runs
//! the flow experiments and applies the trajectory checks. Every outcome name
//! starts with the criterion id (`A1`, `A2`, ...). Independent experiments run
//! through [`exec::map`]; each run itself is sequential.

use std::sync::Arc;
use std::time::Instant;

use crate::cmc::{construct_initial, newton_solve, ContinuationPlan};
use crate::diagnostics::{
    check_barrier_containment, check_boundary_asymptotics, check_energy_balance,
    check_gradient_quantity, check_height_bound, check_monotone, check_w_growth, CheckOutcome,
    CheckStatus, Side, VerificationReport,
};
use crate::error::{invalid, Result};
use crate::exact::{
    barrier_radii, boundary_cap, horosphere_field, sphere_height_field, EquidistanceSphere,
    SphereKind, TangentPlane,
};
use crate::exec::{self, Execution};
use crate::flow::{
    add_boundary_vanishing_bump, epsilon_continuation, run_to_stationarity, DtPolicy, FlowConfig,
    InitialShape, RunOutcome, RunStatus,
};
use crate::geometry::{embed, mean_curvature};
use crate::grid::{Domain, HeightField};

pub const SUITES: [&str; 3] = ["oracles", "flow", "all"];

const SIGMA: f64 = 0.5;
const EPS: f64 = 0.05;
const BUMP: f64 = 0.05;
const SIGMA0: f64 = 0.9;

fn domain() -> Domain {
    Domain::sphere(2, 1.0, EPS)
}

/// Runs a named suite (`oracles`, `flow` or `all`).
pub fn run_suite(name: &str, execution: Execution) -> Result<VerificationReport> {
    match name {
        "oracles" => Ok(oracle_suite(execution)),
        "flow" => Ok(flow_suite(execution)),
        "all" => {
            let mut report = oracle_suite(execution);
            report.extend(flow_suite(execution).checks);
            Ok(report)
        }
        other => Err(invalid(
            "suite",
            format!(
                "unknown suite `{other}` (expected one of {})",
                SUITES.join(", ")
            ),
        )),
    }
}

fn hard(check: impl Into<String>, ok: bool, measured: f64, bound: f64) -> CheckOutcome {
    let status = if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    CheckOutcome::new(check, status, measured, bound)
}

fn renamed(mut outcome: CheckOutcome, name: impl Into<String>) -> CheckOutcome {
    outcome.check = name.into();
    outcome
}

fn failed(name: &str, err: impl std::fmt::Display) -> Vec<CheckOutcome> {
    vec![
        CheckOutcome::new(name, CheckStatus::Fail, f64::NAN, f64::NAN).with_detail(err.to_string()),
    ]
}

fn runtime(name: &str, start: Instant, limit: f64) -> CheckOutcome {
    let secs = start.elapsed().as_secs_f64();
    hard(name, secs < limit, secs, limit).with_detail("wall seconds")
}

/// Closed-form closures: A1 plus horosphere, constant-height and Newton-at-the-root checks.
pub fn oracle_suite(execution: Execution) -> VerificationReport {
    let mut report = VerificationReport::default();
    report.extend(curvature_closure(execution));
    report.extend(elementary_closures());
    report
}

/// A1: `sup |H - sigma|` of exact caps at N = 200 and its decay when `h` halves.
pub fn curvature_closure(execution: Execution) -> Vec<CheckOutcome> {
    let start = Instant::now();
    let cases: Vec<(usize, f64)> = [1usize, 2, 3]
        .iter()
        .flat_map(|&n| [0.0, 0.3, 0.5, 0.9].map(|s| (n, s)))
        .collect();
    let errors = exec::map(
        execution,
        cases.clone(),
        |(n, sigma)| -> Result<(f64, f64)> {
            let dom = Domain::sphere(n, 1.0, EPS);
            let err = |nodes: usize| -> Result<f64> {
                let grid = Arc::new(dom.grid(nodes)?);
                let cap = sphere_height_field(&boundary_cap(&dom, sigma)?, grid.clone())?;
                let h = mean_curvature(&cap)?;
                Ok(grid
                    .interior()
                    .map(|i| (h[i] - sigma).abs())
                    .fold(0.0, f64::max))
            };
            Ok((err(200)?, err(399)?))
        },
    );
    let mut worst = 0.0f64;
    let mut worst_ratio = f64::INFINITY;
    let mut detail = Vec::new();
    for ((n, sigma), res) in cases.iter().zip(errors) {
        match res {
            Ok((coarse, fine)) => {
                worst = worst.max(coarse);
                worst_ratio = worst_ratio.min(coarse / fine);
                detail.push(format!(
                    "n={n} sigma={sigma}: {coarse:.2e} ({:.2}x)",
                    coarse / fine
                ));
            }
            Err(e) => return failed("A1 cap curvature", e),
        }
    }
    vec![
        hard("A1 sup|H-sigma| at N=200", worst <= 2e-3, worst, 2e-3).with_detail(detail.join("; ")),
        hard(
            "A1 error reduction when h halves",
            worst_ratio >= 3.5,
            worst_ratio,
            3.5,
        ),
        runtime("A1 runtime", start, 1.0),
    ]
}

fn elementary_closures() -> Vec<CheckOutcome> {
    let run = || -> Result<Vec<CheckOutcome>> {
        let dom = domain();
        let horo_err = |nodes: usize| -> Result<f64> {
            let grid = Arc::new(dom.grid(nodes)?);
            let h = mean_curvature(&horosphere_field(EPS, grid.clone())?)?;
            Ok(grid
                .interior()
                .map(|i| (h[i] - 1.0).abs())
                .fold(0.0, f64::max))
        };
        let (coarse, fine) = (horo_err(200)?, horo_err(399)?);
        let grid = Arc::new(dom.grid(200)?);
        let flat = HeightField::from_fn(grid.clone(), |_| 0.3)?;
        let flat_err = mean_curvature(&flat)?
            .iter()
            .fold(0.0f64, |m, h| m.max(h.abs()));
        let cap = sphere_height_field(&boundary_cap(&dom, SIGMA)?, grid.clone())?;
        let newton = newton_solve(&cap, SIGMA, &ContinuationPlan::new(SIGMA))?;
        Ok(vec![
            hard(
                "oracle horosphere H = 1 at N=200",
                coarse <= 1e-4,
                coarse,
                1e-4,
            ),
            hard(
                "oracle horosphere error reduction when h halves",
                coarse / fine >= 3.5,
                coarse / fine,
                3.5,
            ),
            hard(
                "oracle constant height H = 0",
                flat_err <= 1e-12,
                flat_err,
                1e-12,
            ),
            hard(
                "oracle Newton from the exact cap",
                newton.iterations <= 2 || newton.residual < 1e-12,
                newton.iterations as f64,
                2.0,
            )
            .with_detail(format!("residual {:e}", newton.residual)),
        ])
    };
    run().unwrap_or_else(|e| failed("oracle closures", e))
}

#[derive(Debug, Clone, Copy)]
enum FlowJob {
    Stationarity,
    PerturbedCap,
    RefinedPerturbedCap,
    Monotone,
    Uniformity,
    Elliptic,
    ZeroSigma,
}

/// A2 to A12.
pub fn flow_suite(execution: Execution) -> VerificationReport {
    let jobs = vec![
        FlowJob::Stationarity,
        FlowJob::PerturbedCap,
        FlowJob::RefinedPerturbedCap,
        FlowJob::Monotone,
        FlowJob::Uniformity,
        FlowJob::Elliptic,
        FlowJob::ZeroSigma,
    ];
    // the continuation fans out on its own; keep the outer batch parallel too
    let results = exec::map(execution, jobs, |job| match job {
        FlowJob::Stationarity => stationarity(),
        FlowJob::PerturbedCap => perturbed_cap(),
        FlowJob::RefinedPerturbedCap => refined_perturbed_cap(),
        FlowJob::Monotone => monotone(),
        FlowJob::Uniformity => epsilon_uniformity(execution),
        FlowJob::Elliptic => elliptic_agreement(),
        FlowJob::ZeroSigma => zero_sigma(),
    });
    let mut report = VerificationReport::default();
    for outcomes in results {
        report.extend(outcomes);
    }
    report
        .checks
        .sort_by_key(|c| criterion_number(&c.check).unwrap_or(usize::MAX));
    report
}

/// Numeric part of a leading `A<k>` id.
pub fn criterion_number(check: &str) -> Option<usize> {
    let id = check.split_whitespace().next()?;
    id.strip_prefix('A')?.parse().ok()
}

fn cap_field(nodes: usize) -> Result<HeightField> {
    let dom = domain();
    let grid = Arc::new(dom.grid(nodes)?);
    sphere_height_field(&boundary_cap(&dom, SIGMA)?, grid)
}

/// A2: the exact cap barely moves under the flow.
pub fn stationarity() -> Vec<CheckOutcome> {
    let run = || -> Result<Vec<CheckOutcome>> {
        let start = Instant::now();
        let cap = cap_field(200)?;
        let mut cfg = FlowConfig::new(SIGMA, domain(), 200);
        cfg.t_max = 1.0;
        // run the full interval regardless of the stationarity test
        cfg.residual_tol = f64::MIN_POSITIVE;
        cfg.record_fields = false;
        let out = run_to_stationarity(&cfg, &cap)?;
        let drift = out.final_field().max_abs_diff(&cap);
        Ok(vec![
            hard(
                "A2 sup|v(1) - v(0)| from the exact cap",
                drift <= 1e-6,
                drift,
                1e-6,
            )
            .with_detail(format!(
                "initial residual {:e}",
                out.trajectory.records[0].residual_sup
            )),
            runtime("A2 runtime", start, 5.0),
        ])
    };
    run().unwrap_or_else(|e| failed("A2 stationarity", e))
}

fn perturbed_cap_run(nodes: usize, dt: f64) -> Result<(HeightField, HeightField, RunOutcome)> {
    let cap = cap_field(nodes)?;
    let v0 = add_boundary_vanishing_bump(&cap, BUMP);
    let mut cfg = FlowConfig::new(SIGMA, domain(), nodes);
    cfg.dt = DtPolicy::Fixed { dt };
    cfg.diag_every = 10;
    let out = run_to_stationarity(&cfg, &v0)?;
    Ok((cap, v0, out))
}

/// A3, A4 (base resolution), A6, A9, A10 and A11 on the perturbed cap run.
pub fn perturbed_cap() -> Vec<CheckOutcome> {
    let run = || -> Result<Vec<CheckOutcome>> {
        let start = Instant::now();
        let (cap, v0, out) = perturbed_cap_run(400, 1e-3)?;
        let elapsed = runtime("A3 runtime", start, 60.0);
        let traj = &out.trajectory;
        let diff = out.final_field().max_abs_diff(&cap);
        let converged = out.status == RunStatus::Converged && out.final_state.t <= 50.0;
        let mut outcomes = vec![
            hard("A3 converged by t = 50", converged, out.final_state.t, 50.0)
                .with_detail(format!("{:?}", out.status)),
            hard("A3 sup|v_final - v_cap|", diff <= 1e-3, diff, 1e-3),
            elapsed,
        ];
        let mut energy = check_energy_balance(traj, 0.05);
        outcomes.push(renamed(
            energy.remove(0),
            "A4 energy descent per step (N=400)",
        ));
        outcomes.push(renamed(energy.remove(0), "A4 energy balance (N=400)"));
        outcomes.push(renamed(
            check_gradient_quantity(traj),
            "A6 gradient maximum principle (A3 run)",
        ));
        outcomes.push(renamed(
            check_height_bound(traj),
            "A9 height bound (A3 run)",
        ));
        outcomes.push(renamed(check_w_growth(traj), "w growth bound (A3 run)"));

        let dom = domain();
        let sphere = boundary_cap(&dom, SIGMA)?;
        // the scaled boundary cap need not contain the bump, so take the larger ball
        let tight = EquidistanceSphere::enclosing(SIGMA, &embed(&v0), 1.0)?;
        let enclosing =
            EquidistanceSphere::centered(SIGMA, 1.001 * tight.radius.max(sphere.radius))?;
        outcomes.push(renamed(
            check_barrier_containment(traj, &enclosing, Side::Inside, 1e-9)?,
            "A10 stays inside the enclosing ball",
        ));
        let delta2 = 0.2;
        let balls = barrier_radii(0.1, delta2, dom.eps, SIGMA)?;
        let (_, right) = dom.boundary_points();
        let outside =
            EquidistanceSphere::new(SIGMA, balls.r2, right + delta2, SphereKind::Exterior)?;
        outcomes.push(renamed(
            check_barrier_containment(traj, &outside, Side::Outside, 1e-9)?,
            "A10 stays outside the ball beyond the boundary",
        ));

        let plane = TangentPlane::touching(&sphere, (right, dom.eps));
        let eta = plane.field(out.final_field().grid_arc().clone())?;
        outcomes.push(renamed(
            check_boundary_asymptotics(out.final_field(), &eta),
            "A11 boundary asymptotics exponent",
        ));
        Ok(outcomes)
    };
    run().unwrap_or_else(|e| failed("A3 perturbed cap", e))
}

/// A4 with `dt` and `h` halved.
pub fn refined_perturbed_cap() -> Vec<CheckOutcome> {
    let run = || -> Result<Vec<CheckOutcome>> {
        let (_, _, out) = perturbed_cap_run(799, 5e-4)?;
        let mut energy = check_energy_balance(&out.trajectory, 0.01);
        Ok(vec![
            renamed(energy.remove(0), "A4 energy descent per step (h/2, dt/2)"),
            renamed(energy.remove(0), "A4 energy balance (h/2, dt/2)"),
            renamed(
                check_height_bound(&out.trajectory),
                "A9 height bound (refined A3 run)",
            ),
        ])
    };
    run().unwrap_or_else(|e| failed("A4 refined run", e))
}

/// A5 and its A6/A9 checks: flow at sigma from the CMC-sigma0 surface.
pub fn monotone() -> Vec<CheckOutcome> {
    let run = || -> Result<Vec<CheckOutcome>> {
        let nodes = 400;
        let init = construct_initial(&domain(), SIGMA0, nodes, &ContinuationPlan::new(SIGMA0))?;
        let h0 = mean_curvature(&init.field)?;
        let grid = init.field.grid_arc().clone();
        let h_min = grid
            .interior()
            .map(|i| h0[i] - SIGMA)
            .fold(f64::INFINITY, f64::min);
        let cfg = FlowConfig::new(SIGMA, domain(), nodes);
        let out = run_to_stationarity(&cfg, &init.field)?;
        let traj = &out.trajectory;
        let mut energy = check_energy_balance(traj, 0.05);
        Ok(vec![
            renamed(check_monotone(traj, h_min), "A5 minimum step increment"),
            renamed(
                check_gradient_quantity(traj),
                "A6 gradient maximum principle (A5 run)",
            ),
            renamed(check_height_bound(traj), "A9 height bound (A5 run)"),
            renamed(energy.remove(0), "energy descent per step (A5 run)"),
            renamed(check_w_growth(traj), "w growth bound (A5 run)"),
        ])
    };
    run().unwrap_or_else(|e| failed("A5 monotone", e))
}

/// A7: uniform gradient bound and Cauchy behaviour as eps decreases.
pub fn epsilon_uniformity(execution: Execution) -> Vec<CheckOutcome> {
    let run = || -> Result<Vec<CheckOutcome>> {
        let base = FlowConfig::new(SIGMA, domain(), 400);
        let report = epsilon_continuation(
            &base,
            &[0.2, 0.1, 0.05, 0.025],
            InitialShape::PerturbedCap { amplitude: BUMP },
            execution,
        )?;
        let worst_ratio = report.diff_ratios.iter().copied().fold(0.0, f64::max);
        let diffs: Vec<String> = report
            .entries
            .iter()
            .filter_map(|e| e.diff_to_previous.map(|d| format!("{d:.3e}")))
            .collect();
        Ok(vec![
            hard(
                "A7 runs converged",
                !report.partial,
                report.partial as u8 as f64,
                0.0,
            ),
            hard(
                "A7 spread of max w across eps",
                report.w_uniform(1.5),
                report.w_spread,
                1.5,
            ),
            hard(
                "A7 ratio of consecutive differences",
                report.is_cauchy(0.6),
                worst_ratio,
                0.6,
            )
            .with_detail(format!("differences {}", diffs.join(", "))),
        ])
    };
    run().unwrap_or_else(|e| failed("A7 eps uniformity", e))
}

/// A8: Newton solution and flow limit on the same grid.
pub fn elliptic_agreement() -> Vec<CheckOutcome> {
    let run = || -> Result<Vec<CheckOutcome>> {
        let nodes = 400;
        let newton = construct_initial(&domain(), SIGMA, nodes, &ContinuationPlan::new(SIGMA))?;
        let v0 = add_boundary_vanishing_bump(&cap_field(nodes)?, BUMP);
        let mut cfg = FlowConfig::new(SIGMA, domain(), nodes);
        cfg.residual_tol = 1e-11;
        cfg.t_max = 200.0;
        let out = run_to_stationarity(&cfg, &v0)?;
        let diff = out.final_field().max_abs_diff(&newton.field);
        Ok(vec![
            hard("A8 sup|v_newton - v_flow|", diff <= 1e-6, diff, 1e-6).with_detail(format!(
                "flow {:?} at t = {}",
                out.status, out.final_state.t
            )),
            renamed(
                check_height_bound(&out.trajectory),
                "A9 height bound (A8 run)",
            ),
        ])
    };
    run().unwrap_or_else(|e| failed("A8 elliptic agreement", e))
}

/// A12: at sigma = 0 a perturbed hemisphere relaxes to constant height.
pub fn zero_sigma() -> Vec<CheckOutcome> {
    let run = || -> Result<Vec<CheckOutcome>> {
        let dom = domain();
        let nodes = 400;
        let grid = Arc::new(dom.grid(nodes)?);
        let phi = dom.boundary_values(&grid)[0].1;
        let v0 = add_boundary_vanishing_bump(&HeightField::from_fn(grid, |_| phi)?, BUMP);
        let mut cfg = FlowConfig::new(0.0, dom, nodes);
        cfg.residual_tol = 1e-8;
        let out = run_to_stationarity(&cfg, &v0)?;
        let v = out.final_field().values();
        let osc = v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - v.iter().copied().fold(f64::INFINITY, f64::min);
        let mut energy = check_energy_balance(&out.trajectory, 0.05);
        Ok(vec![
            hard(
                "A12 final oscillation sup v - inf v",
                osc <= 1e-6,
                osc,
                1e-6,
            )
            .with_detail(format!("{:?} at t = {}", out.status, out.final_state.t)),
            renamed(
                check_height_bound(&out.trajectory),
                "A9 height bound (A12 run)",
            ),
            renamed(energy.remove(0), "energy descent per step (A12 run)"),
        ])
    };
    run().unwrap_or_else(|e| failed("A12 zero sigma", e))
}
