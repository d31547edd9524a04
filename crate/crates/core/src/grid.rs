//! Meridian grids over the upper hemisphere and radial height fields on them.
//!
//! A hypersurface is written as `X = e^{v(z)} z` for `z` on the unit
//! hemisphere. Every field in this crate depends on a single angle: the polar
//! angle `theta` from the north pole (axisymmetric surfaces, `n >= 2`) or the
//! signed angle `alpha` along one meridian (plane curves, `n = 1`). In both
//! cases the node height on the sphere is `y = cos(angle)`.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Smallest node count any stencil in the crate accepts.
pub const MIN_NODES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Polar angle in `[0, theta_b]`, pole at the first node, Dirichlet data at the last.
    Axisymmetric,
    /// Signed angle in `[alpha_lo, alpha_hi]`, Dirichlet data at both ends. Requires `n = 1`.
    Meridian,
}

impl Topology {
    pub fn as_str(self) -> &'static str {
        match self {
            Topology::Axisymmetric => "axisymmetric",
            Topology::Meridian => "meridian",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeridianGrid {
    n: usize,
    topology: Topology,
    theta: Vec<f64>,
    h: f64,
    area_weights: OnceLock<Vec<f64>>,
    area_cells: OnceLock<Vec<f64>>,
    volume_weights: OnceLock<Vec<f64>>,
}

impl PartialEq for MeridianGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.topology == other.topology
            && self.theta == other.theta
            && self.h == other.h
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (8 points).
const GAUSS8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

impl MeridianGrid {
    /// Uniform grid on `[0, theta_b]` for an `n`-dimensional surface of revolution.
    pub fn axisymmetric(n: usize, theta_b: f64, nodes: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(
                "axisymmetric grids require n >= 2 (use a meridian grid for n = 1)".into(),
            ));
        }
        if !(theta_b > 0.0 && theta_b < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidGrid(format!(
                "boundary angle {theta_b} is outside (0, pi/2)"
            )));
        }
        Self::uniform(n, Topology::Axisymmetric, 0.0, theta_b, nodes)
    }

    /// Uniform grid on `[lo, hi]` along one meridian of the upper half circle (`n = 1`).
    pub fn meridian(lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        let half = std::f64::consts::FRAC_PI_2;
        if !(lo > -half && hi < half && lo < hi) {
            return Err(Error::InvalidGrid(format!(
                "meridian endpoints [{lo}, {hi}] must satisfy -pi/2 < lo < hi < pi/2"
            )));
        }
        Self::uniform(1, Topology::Meridian, lo, hi, nodes)
    }

    fn uniform(n: usize, topology: Topology, lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        if nodes < MIN_NODES {
            return Err(Error::GridTooSmall {
                nodes,
                min: MIN_NODES,
            });
        }
        let h = (hi - lo) / (nodes - 1) as f64;
        let mut theta: Vec<f64> = (0..nodes).map(|i| lo + h * i as f64).collect();
        // pin the endpoint so theta_b is reproduced exactly
        theta[nodes - 1] = hi;
        Ok(Self {
            n,
            topology,
            theta,
            h,
            area_weights: OnceLock::new(),
            area_cells: OnceLock::new(),
            volume_weights: OnceLock::new(),
        })
    }

    /// Rebuilds a grid from stored node angles, checking uniformity.
    pub fn from_nodes(n: usize, topology: Topology, theta: Vec<f64>) -> Result<Self> {
        if theta.len() < MIN_NODES {
            return Err(Error::GridTooSmall {
                nodes: theta.len(),
                min: MIN_NODES,
            });
        }
        let grid = match topology {
            Topology::Axisymmetric => {
                if theta[0] != 0.0 {
                    return Err(Error::InvalidGrid(
                        "axisymmetric grid must start at the pole".into(),
                    ));
                }
                Self::axisymmetric(n, *theta.last().unwrap(), theta.len())?
            }
            Topology::Meridian => {
                if n != 1 {
                    return Err(Error::InvalidGrid("meridian grids require n = 1".into()));
                }
                Self::meridian(theta[0], *theta.last().unwrap(), theta.len())?
            }
        };
        let scale = grid.theta.iter().fold(1.0f64, |m, t| m.max(t.abs()));
        for (a, b) in grid.theta.iter().zip(&theta) {
            if (a - b).abs() > 1e-12 * scale {
                return Err(Error::InvalidGrid(
                    "node angles are not uniformly spaced".into(),
                ));
            }
        }
        Ok(Self { theta, ..grid })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn last(&self) -> usize {
        self.theta.len() - 1
    }

    /// `y = e . z = cos(angle)` at node `i`.
    pub fn y(&self, i: usize) -> f64 {
        self.theta[i].cos()
    }

    /// Indices held fixed by Dirichlet data.
    pub fn dirichlet_nodes(&self) -> Vec<usize> {
        match self.topology {
            Topology::Axisymmetric => vec![self.last()],
            Topology::Meridian => vec![0, self.last()],
        }
    }

    pub fn is_dirichlet(&self, i: usize) -> bool {
        i == self.last() || (self.topology == Topology::Meridian && i == 0)
    }

    /// Index range of the evolved (non-Dirichlet) nodes.
    pub fn interior(&self) -> std::ops::Range<usize> {
        match self.topology {
            Topology::Axisymmetric => 0..self.last(),
            Topology::Meridian => 1..self.last(),
        }
    }

    /// Distance in nodes from `i` to the nearest Dirichlet node.
    pub fn nodes_from_boundary(&self, i: usize) -> usize {
        match self.topology {
            Topology::Axisymmetric => self.last() - i,
            Topology::Meridian => i.min(self.last() - i),
        }
    }

    /// Quadrature density of `dz` per unit angle: `|S^{n-1}| sin^{n-1}(theta)` or `1`.
    pub fn measure_density(&self, i: usize) -> f64 {
        match self.topology {
            Topology::Axisymmetric => {
                sphere_area(self.n - 1) * self.theta[i].sin().powi(self.n as i32 - 1)
            }
            Topology::Meridian => 1.0,
        }
    }

    /// Composite trapezoid weights for `integral f dz` over the grid.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let last = self.last();
        (0..self.len())
            .map(|i| {
                let end = if i == 0 || i == last { 0.5 } else { 1.0 };
                end * self.h * self.measure_density(i)
            })
            .collect()
    }

    /// `integral over [theta_j, theta_{j+1}] of phi y^{-power} dz` for each cell `j`, where
    /// `phi` is the hat function of the left (`.0`) or right (`.1`) node.
    fn cell_moments(&self, power: i32) -> Vec<(f64, f64)> {
        let half = 0.5 * self.h;
        (0..self.last())
            .map(|j| {
                let (a, b) = (self.theta[j], self.theta[j + 1]);
                let mid = 0.5 * (a + b);
                GAUSS8.iter().fold((0.0, 0.0), |(l, r), &(x, gw)| {
                    let t = mid + half * x;
                    let density = match self.topology {
                        Topology::Axisymmetric => {
                            sphere_area(self.n - 1) * t.sin().powi(self.n as i32 - 1)
                        }
                        Topology::Meridian => 1.0,
                    };
                    let g = gw * half * density * t.cos().powi(-power);
                    let s = (t - a) / (b - a);
                    (l + g * (1.0 - s), r + g * s)
                })
            })
            .collect()
    }

    /// Weights `W_i = integral phi_i y^{-power} dz` for the piecewise-linear hat functions `phi_i`.
    ///
    /// `sum_i f_i W_i` is the trapezoid rule applied to `f` only; the steep factor
    /// `y^{-power}` near the lifted boundary is integrated to round-off.
    pub fn product_weights(&self, power: i32) -> Vec<f64> {
        let mut weights = vec![0.0; self.len()];
        for (j, (l, r)) in self.cell_moments(power).into_iter().enumerate() {
            weights[j] += l;
            weights[j + 1] += r;
        }
        weights
    }

    /// `integral over cell j of y^{-power} dz`, one entry per cell.
    pub fn cell_weights(&self, power: i32) -> Vec<f64> {
        self.cell_moments(power)
            .into_iter()
            .map(|(l, r)| l + r)
            .collect()
    }

    /// [`Self::cell_weights`] for `y^{-n}` (the area element), cached.
    pub fn area_cell_weights(&self) -> &[f64] {
        self.area_cells
            .get_or_init(|| self.cell_weights(self.n as i32))
    }

    /// [`Self::product_weights`] for `y^{-n}` (the area element), cached.
    pub fn area_weights(&self) -> &[f64] {
        self.area_weights
            .get_or_init(|| self.product_weights(self.n as i32))
    }

    /// [`Self::product_weights`] for `y^{-(n+1)}` (the volume element), cached.
    pub fn volume_weights(&self) -> &[f64] {
        self.volume_weights
            .get_or_init(|| self.product_weights(self.n as i32 + 1))
    }
}

/// Area of the unit sphere `S^k` in `R^{k+1}`.
pub fn sphere_area(k: usize) -> f64 {
    use std::f64::consts::PI;
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 1.0) * sphere_area(k - 2),
    }
}

/// Radial height values `v` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightField {
    grid: Arc<MeridianGrid>,
    v: Vec<f64>,
}

impl HeightField {
    pub fn new(grid: Arc<MeridianGrid>, v: Vec<f64>) -> Result<Self> {
        if v.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: v.len(),
            });
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(invalid(
                "v",
                format!("non-finite radial height at node {i}"),
            ));
        }
        Ok(Self { grid, v })
    }

    pub fn from_fn(grid: Arc<MeridianGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let v = grid.theta().iter().map(|&t| f(t)).collect();
        Self::new(grid, v)
    }

    pub(crate) fn from_parts_unchecked(grid: Arc<MeridianGrid>, v: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), v.len());
        Self { grid, v }
    }

    pub fn grid(&self) -> &MeridianGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<MeridianGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.v
    }

    pub fn into_values(self) -> Vec<f64> {
        self.v
    }

    /// Embedded height `u = y e^v` per node.
    pub fn heights(&self) -> Vec<f64> {
        self.v
            .iter()
            .enumerate()
            .map(|(i, v)| self.grid.y(i) * v.exp())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &HeightField) -> f64 {
        self.v
            .iter()
            .zip(&other.v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            n: self.grid.n(),
            topology: self.grid.topology(),
            theta: self.grid.theta().to_vec(),
            v: self.v.clone(),
        }
    }

    /// Linear interpolation of `v` at angle `t` (must lie inside the grid).
    pub fn interpolate(&self, t: f64) -> f64 {
        let theta = self.grid.theta();
        let h = self.grid.h();
        let pos = ((t - theta[0]) / h).clamp(0.0, (theta.len() - 1) as f64);
        let i = (pos.floor() as usize).min(theta.len() - 2);
        let s = (t - theta[i]) / h;
        self.v[i] * (1.0 - s) + self.v[i + 1] * s
    }
}

/// On-disk form of a height field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub n: usize,
    pub topology: Topology,
    pub theta: Vec<f64>,
    pub v: Vec<f64>,
}

impl Snapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| invalid("snapshot", e.to_string()))
    }

    pub fn into_field(self) -> Result<HeightField> {
        let grid = MeridianGrid::from_nodes(self.n, self.topology, self.theta)?;
        HeightField::new(Arc::new(grid), self.v)
    }
}

/// Trace of the surface on the plane at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Boundary {
    /// Round sphere of radius `r` centred on the vertical axis.
    Sphere { r: f64 },
    /// Two points `left < right` on the line at infinity (`n = 1` only).
    Interval { left: f64, right: f64 },
}

/// The lifted Dirichlet problem: dimension, asymptotic boundary and lift height `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub n: usize,
    pub boundary: Boundary,
    pub eps: f64,
}

impl Domain {
    pub fn sphere(n: usize, r: f64, eps: f64) -> Self {
        Self {
            n,
            boundary: Boundary::Sphere { r },
            eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(invalid("n", "dimension must be >= 1"));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(invalid("eps", "lift height must be > 0"));
        }
        match self.boundary {
            Boundary::Sphere { r } => {
                if !(r > 0.0) || !r.is_finite() {
                    return Err(invalid("r", "boundary radius must be > 0"));
                }
            }
            Boundary::Interval { left, right } => {
                if self.n != 1 {
                    return Err(invalid("n", "interval boundaries require n = 1"));
                }
                if !(left < right) {
                    return Err(invalid("boundary", "interval requires left < right"));
                }
            }
        }
        Ok(())
    }

    /// Euclidean diameter of the flat domain enclosed by the boundary.
    pub fn diameter(&self) -> f64 {
        match self.boundary {
            Boundary::Sphere { r } => 2.0 * r,
            Boundary::Interval { left, right } => right - left,
        }
    }

    /// Horizontal centre of the enclosed domain.
    pub fn center(&self) -> f64 {
        match self.boundary {
            Boundary::Sphere { .. } => 0.0,
            Boundary::Interval { left, right } => 0.5 * (left + right),
        }
    }

    /// Horizontal coordinates of the lifted boundary points in the meridian plane.
    pub fn boundary_points(&self) -> (f64, f64) {
        match self.boundary {
            Boundary::Sphere { r } => (-r, r),
            Boundary::Interval { left, right } => (left, right),
        }
    }

    pub fn grid(&self, nodes: usize) -> Result<MeridianGrid> {
        self.validate()?;
        let (left, right) = self.boundary_points();
        if self.n >= 2 {
            let r = right;
            MeridianGrid::axisymmetric(self.n, r.atan2(self.eps), nodes)
        } else {
            MeridianGrid::meridian(left.atan2(self.eps), right.atan2(self.eps), nodes)
        }
    }

    /// Dirichlet value `phi^eps = log |P|` for each boundary node of `grid`.
    pub fn boundary_values(&self, grid: &MeridianGrid) -> Vec<(usize, f64)> {
        let (left, right) = self.boundary_points();
        grid.dirichlet_nodes()
            .into_iter()
            .map(|i| {
                let x = if i == 0 { left } else { right };
                (i, 0.5 * (x * x + self.eps * self.eps).ln())
            })
            .collect()
    }
}
