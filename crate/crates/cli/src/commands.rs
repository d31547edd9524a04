use std::sync::Arc;

use anyhow::{bail, Result};
use mmcf::cmc::{construct_initial, ContinuationLogEntry};
use mmcf::diagnostics::{CheckStatus, DiagnosticsRecord};
use mmcf::exact::{boundary_cap, sphere_height_field};
use mmcf::exec::{self, Execution};
use mmcf::flow::{epsilon_continuation, run_with_observer, RunStatus as FlowStatus};
use mmcf::geometry::mean_curvature;
use mmcf::verify::run_suite;
use mmcf::{Error, Snapshot};
use serde::Serialize;
use serde_json::{json, Value};

use crate::artifacts::{OutputDir, RunStatus};
use crate::config::Settings;

/// What a command reports back to the driver besides its files.
pub struct Outcome {
    pub status: RunStatus,
    pub extra: Value,
}

const CAUCHY_RATIO: f64 = 0.6;
const W_SPREAD: f64 = 1.5;

fn snapshot_json(snapshot: &Snapshot) -> Vec<u8> {
    snapshot.to_json().into_bytes()
}

pub fn flow(settings: &Settings, out: &mut OutputDir) -> Result<Outcome> {
    let cfg = &settings.flow;
    cfg.validate()?;
    let v0 = settings.initial.build(&cfg.domain, cfg.sigma, cfg.nodes)?;

    let times = &settings.snapshot_times;
    let mut taken = Vec::new();
    let mut next = 0;
    let result = run_with_observer(cfg, &v0, |state| {
        while next < times.len() && state.t >= times[next] - 1e-12 {
            taken.push((
                times[next],
                state.t,
                state.step_count,
                state.field.snapshot(),
            ));
            next += 1;
        }
    });

    let mut snapshots = Vec::new();
    for (k, (requested, t, step, snap)) in taken.iter().enumerate() {
        let file = format!("snapshots/snapshot_{k:03}.json");
        out.write(&file, &snapshot_json(snap))?;
        snapshots.push(json!({ "file": file, "requested_t": requested, "t": t, "step": step }));
    }

    let run = match result {
        Ok(run) => run,
        Err(err) => {
            let last_good = match &err {
                Error::NonFinite { last_good, .. } => Some(last_good.as_ref()),
                Error::SingularSystem { snapshot, .. } => Some(snapshot.as_ref()),
                _ => None,
            };
            if let Some(field) = last_good {
                out.write("last_good.json", &snapshot_json(&field.snapshot()))?;
            }
            return Err(err.into());
        }
    };

    let mut csv = String::from(DiagnosticsRecord::CSV_HEADER);
    csv.push('\n');
    for r in &run.trajectory.records {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    out.write("timeseries.csv", csv.as_bytes())?;
    out.write("final.json", &snapshot_json(&run.final_field().snapshot()))?;

    let status = match run.status {
        FlowStatus::Converged => RunStatus::Converged,
        FlowStatus::TimedOut => RunStatus::TimedOut,
    };
    let last = &run.final_state.last_diagnostics;
    Ok(Outcome {
        status,
        extra: json!({
            "t_final": run.final_state.t,
            "steps": run.final_state.step_count,
            "dt": run.dt,
            "residual_sup": last.residual_sup,
            "energy": last.energy,
            "snapshots": snapshots,
        }),
    })
}

pub fn cmc(settings: &Settings, out: &mut OutputDir) -> Result<Outcome> {
    let cfg = &settings.flow;
    let plan = &settings.plan;
    let init = construct_initial(&cfg.domain, plan.sigma_target, cfg.nodes, plan)?;

    out.write("initial.json", &snapshot_json(&init.field.snapshot()))?;
    let mut log = String::from(ContinuationLogEntry::CSV_HEADER);
    log.push('\n');
    for entry in &init.log {
        log.push_str(&entry.csv_row());
        log.push('\n');
    }
    out.write("continuation_log.csv", log.as_bytes())?;

    Ok(Outcome {
        status: RunStatus::Converged,
        extra: json!({
            "sigma0": init.sigma0,
            "continuation_steps": init.log.len(),
            "checks": init.checks,
            "heights_ok": init.checks.heights_ok(),
            "curvature_sandwich_ok": init.checks.curvature_sandwich_ok(),
        }),
    })
}

pub fn verify(suite: &str, execution: Execution, out: &mut OutputDir) -> Result<Outcome> {
    let report = run_suite(suite, execution)?;
    out.write("verify_report.json", report.to_json().as_bytes())?;
    for c in &report.checks {
        println!(
            "{:<5} {}  measured {:e}  bound {:e}{}",
            c.status.as_str(),
            c.check,
            c.measured,
            c.bound,
            if c.detail.is_empty() {
                String::new()
            } else {
                format!("  ({})", c.detail)
            }
        );
    }
    let failed = report
        .checks
        .iter()
        .filter(|c| c.status == CheckStatus::Fail)
        .count();
    let status = if failed == 0 {
        RunStatus::Passed
    } else {
        RunStatus::Failed
    };
    Ok(Outcome {
        status,
        extra: json!({ "suite": suite, "checks": report.checks.len(), "failed": failed }),
    })
}

#[derive(Debug, Serialize)]
struct ResolutionRow {
    nodes: usize,
    h: f64,
    curvature_error: f64,
    observed_order: Option<f64>,
}

pub fn sweep(settings: &Settings, execution: Execution, out: &mut OutputDir) -> Result<Outcome> {
    match (&settings.eps_list, &settings.nodes_list) {
        (Some(_), Some(_)) => bail!("keys `eps_list` and `nodes_list` are mutually exclusive"),
        (None, None) => bail!("sweep needs key `eps_list` or `nodes_list`"),
        (Some(eps), None) => eps_sweep(settings, eps, execution, out),
        (None, Some(nodes)) => resolution_sweep(settings, nodes, execution, out),
    }
}

fn eps_sweep(
    settings: &Settings,
    eps_list: &[f64],
    execution: Execution,
    out: &mut OutputDir,
) -> Result<Outcome> {
    let report = epsilon_continuation(&settings.flow, eps_list, settings.initial, execution)?;
    let summary = json!({
        "kind": "eps",
        "report": report,
        "cauchy_ratio_bound": CAUCHY_RATIO,
        "is_cauchy": report.is_cauchy(CAUCHY_RATIO),
        "w_spread_bound": W_SPREAD,
        "w_uniform": report.w_uniform(W_SPREAD),
    });
    out.write(
        "sweep_report.json",
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    for e in &report.entries {
        println!(
            "eps {:<8} {:?}  t {:.3}  w_max {:.6}  diff {}",
            e.eps,
            e.status,
            e.t_final,
            e.w_max,
            e.diff_to_previous.map_or("-".into(), |d| format!("{d:e}"))
        );
    }
    println!(
        "w spread {:.4} (uniform: {}), ratios {:?} (cauchy: {})",
        report.w_spread,
        report.w_uniform(W_SPREAD),
        report.diff_ratios,
        report.is_cauchy(CAUCHY_RATIO)
    );
    let status = if report.partial {
        RunStatus::TimedOut
    } else {
        RunStatus::Converged
    };
    Ok(Outcome {
        status,
        extra: json!({ "is_cauchy": report.is_cauchy(CAUCHY_RATIO), "w_uniform": report.w_uniform(W_SPREAD) }),
    })
}

/// Curvature error of the exact cap at each resolution and the observed order between neighbours.
fn resolution_sweep(
    settings: &Settings,
    nodes_list: &[usize],
    execution: Execution,
    out: &mut OutputDir,
) -> Result<Outcome> {
    if nodes_list.is_empty() {
        bail!("invalid value for key `nodes_list`: empty list");
    }
    let cfg = &settings.flow;
    let cap = boundary_cap(&cfg.domain, cfg.sigma)?;
    let errors = exec::map(
        execution,
        nodes_list.to_vec(),
        |nodes| -> Result<(usize, f64, f64)> {
            let grid = Arc::new(cfg.domain.grid(nodes)?);
            let field = sphere_height_field(&cap, grid.clone())?;
            let h = mean_curvature(&field)?;
            let err = grid
                .interior()
                .map(|i| (h[i] - cfg.sigma).abs())
                .fold(0.0, f64::max);
            Ok((nodes, grid.h(), err))
        },
    );
    let errors = errors.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<ResolutionRow> = Vec::with_capacity(errors.len());
    for (k, &(nodes, h, err)) in errors.iter().enumerate() {
        let observed_order = k
            .checked_sub(1)
            .map(|j| (errors[j].2 / err).ln() / (errors[j].1 / h).ln());
        rows.push(ResolutionRow {
            nodes,
            h,
            curvature_error: err,
            observed_order,
        });
    }
    let min_order = rows
        .iter()
        .filter_map(|r| r.observed_order)
        .fold(f64::INFINITY, f64::min);
    for r in &rows {
        println!(
            "N {:<6} h {:.4e}  error {:.4e}  order {}",
            r.nodes,
            r.h,
            r.curvature_error,
            r.observed_order.map_or("-".into(), |o| format!("{o:.3}"))
        );
    }
    let summary = json!({
        "kind": "resolution",
        "rows": rows,
        "min_observed_order": if min_order.is_finite() { Some(min_order) } else { None },
    });
    out.write(
        "sweep_report.json",
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    Ok(Outcome {
        status: RunStatus::Converged,
        extra: json!({ "min_observed_order": summary["min_observed_order"] }),
    })
}
