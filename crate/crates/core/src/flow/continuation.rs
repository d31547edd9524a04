//! Runs the flow for a decreasing list of lifts `eps` and compares the limits.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{add_boundary_vanishing_bump, run_to_stationarity, FlowConfig, RunStatus};
use crate::cmc::{construct_initial, ContinuationPlan};
use crate::error::{invalid, Result};
use crate::exact::{boundary_cap, sphere_height_field};
use crate::exec::{self, Execution};
use crate::grid::{Domain, HeightField};

/// Initial surface used for every `eps` in a continuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialShape {
    /// Exact cap through the lifted boundary at the flow's `sigma` (circular boundary only).
    Cap,
    /// The cap plus a bump vanishing on the Dirichlet nodes.
    PerturbedCap { amplitude: f64 },
    /// CMC-`sigma0` graph from the elliptic solver.
    Cmc { sigma0: f64 },
}

impl InitialShape {
    pub fn build(&self, domain: &Domain, sigma: f64, nodes: usize) -> Result<HeightField> {
        match *self {
            InitialShape::Cap => cap_on(domain, sigma, nodes),
            InitialShape::PerturbedCap { amplitude } => Ok(add_boundary_vanishing_bump(
                &cap_on(domain, sigma, nodes)?,
                amplitude,
            )),
            InitialShape::Cmc { sigma0 } => {
                Ok(construct_initial(domain, sigma0, nodes, &ContinuationPlan::new(sigma0))?.field)
            }
        }
    }
}

fn cap_on(domain: &Domain, sigma: f64, nodes: usize) -> Result<HeightField> {
    let grid = Arc::new(domain.grid(nodes)?);
    sphere_height_field(&boundary_cap(domain, sigma)?, grid)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuationEntry {
    pub eps: f64,
    pub status: RunStatus,
    pub t_final: f64,
    pub steps: usize,
    pub residual: f64,
    /// Largest `w` over all steps and nodes of the run.
    pub w_max: f64,
    /// Sup difference to the previous entry's limit on the common window (absent for the first).
    pub diff_to_previous: Option<f64>,
    #[serde(skip)]
    pub field: Option<HeightField>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuationReport {
    pub entries: Vec<ContinuationEntry>,
    /// Largest over smallest of the per-run `w_max`.
    pub w_spread: f64,
    /// `diff[k+1] / diff[k]` for consecutive differences.
    pub diff_ratios: Vec<f64>,
    /// Set when any run timed out.
    pub partial: bool,
    /// Angular window shared by every grid.
    pub window: (f64, f64),
}

impl ContinuationReport {
    pub fn w_uniform(&self, factor: f64) -> bool {
        self.w_spread <= factor
    }

    pub fn is_cauchy(&self, ratio: f64) -> bool {
        self.diff_ratios.iter().all(|r| *r <= ratio)
    }
}

/// Runs `base` for each `eps` in `eps_list` (strictly decreasing) and reports uniformity.
///
/// Runs are independent and go through [`exec::map`]; the report is assembled in list order.
pub fn epsilon_continuation(
    base: &FlowConfig,
    eps_list: &[f64],
    shape: InitialShape,
    execution: Execution,
) -> Result<ContinuationReport> {
    if eps_list.is_empty() {
        return Err(invalid("eps_list", "empty list"));
    }
    if eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(invalid("eps_list", "every eps must be > 0"));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("eps_list", "must be strictly decreasing"));
    }
    base.validate()?;

    let jobs: Vec<f64> = eps_list.to_vec();
    let results = exec::map(execution, jobs, |eps| -> Result<_> {
        let config = FlowConfig {
            domain: Domain { eps, ..base.domain },
            record_fields: false,
            ..base.clone()
        };
        let v0 = shape.build(&config.domain, config.sigma, config.nodes)?;
        let out = run_to_stationarity(&config, &v0)?;
        let w_max = out
            .trajectory
            .records
            .iter()
            .map(|r| r.w_max.max(r.w_interior_max))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok((eps, out, w_max))
    });

    let mut entries: Vec<ContinuationEntry> = Vec::with_capacity(results.len());
    for res in results {
        let (eps, out, w_max) = res?;
        entries.push(ContinuationEntry {
            eps,
            status: out.status,
            t_final: out.final_state.t,
            steps: out.final_state.step_count,
            residual: out.final_state.last_diagnostics.residual_sup,
            w_max,
            diff_to_previous: None,
            field: Some(out.final_state.field),
        });
    }

    // largest eps has the narrowest angular range
    let window_grid = entries[0]
        .field
        .as_ref()
        .expect("set above")
        .grid_arc()
        .clone();
    let window = (
        window_grid.theta()[0],
        window_grid.theta()[window_grid.last()],
    );
    for k in 1..entries.len() {
        let (prev, cur) = (&entries[k - 1], &entries[k]);
        let a = prev.field.as_ref().expect("set above");
        let b = cur.field.as_ref().expect("set above");
        let diff = window_grid
            .theta()
            .iter()
            .map(|&t| (a.interpolate(t) - b.interpolate(t)).abs())
            .fold(0.0, f64::max);
        entries[k].diff_to_previous = Some(diff);
    }

    let (w_lo, w_hi) = entries
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e.w_max), hi.max(e.w_max))
        });
    let diffs: Vec<f64> = entries.iter().filter_map(|e| e.diff_to_previous).collect();
    let diff_ratios = diffs.windows(2).map(|d| d[1] / d[0]).collect();
    let partial = entries.iter().any(|e| e.status == RunStatus::TimedOut);

    Ok(ContinuationReport {
        entries,
        w_spread: w_hi / w_lo,
        diff_ratios,
        partial,
        window,
    })
}
