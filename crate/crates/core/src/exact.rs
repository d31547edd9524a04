//! Closed-form surfaces of constant hyperbolic mean curvature.
//!
//! A Euclidean sphere of radius `R` centred at height `-sigma R` meets the
//! upper half-space in a surface of constant mean curvature `sigma` for the
//! outward normal (interior kind); centred at `+sigma R` it has curvature
//! `sigma` for the inward normal (exterior kind). Horizontal planes are
//! horospheres (`H = 1`), and planes `x.e1 + lambda x_{n+1} = c` with
//! `lambda = sigma / sqrt(1 - sigma^2)` have curvature `sigma`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Domain, HeightField, MeridianGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereKind {
    /// Centre at height `-sigma R`; curvature `sigma` w.r.t. the outward normal.
    Interior,
    /// Centre at height `+sigma R`; curvature `sigma` w.r.t. the inward normal.
    Exterior,
}

/// Equidistance sphere, described in the meridian plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquidistanceSphere {
    pub sigma: f64,
    pub radius: f64,
    /// Horizontal offset of the centre from the vertical axis (meridian plane).
    pub offset: f64,
    pub kind: SphereKind,
}

impl EquidistanceSphere {
    pub fn new(sigma: f64, radius: f64, offset: f64, kind: SphereKind) -> Result<Self> {
        check_sigma(sigma)?;
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid("radius", "sphere radius must be > 0"));
        }
        Ok(Self {
            sigma,
            radius,
            offset,
            kind,
        })
    }

    /// Interior sphere centred on the axis.
    pub fn centered(sigma: f64, radius: f64) -> Result<Self> {
        Self::new(sigma, radius, 0.0, SphereKind::Interior)
    }

    /// Smallest axis-centred interior sphere containing `points`, enlarged by the factor `margin`.
    ///
    /// A point `(rho, x)` lies inside the sphere of radius `R` centred at `(0, -sigma R)` iff
    /// `(1 - sigma^2) R^2 - 2 sigma x R - (rho^2 + x^2) >= 0`.
    pub fn enclosing(sigma: f64, points: &[(f64, f64)], margin: f64) -> Result<Self> {
        check_sigma(sigma)?;
        let a = 1.0 - sigma * sigma;
        let needed = points.iter().fold(0.0f64, |m, &(rho, x)| {
            let b = sigma * x;
            m.max((b + (b * b + a * (rho * rho + x * x)).sqrt()) / a)
        });
        Self::centered(sigma, needed * margin)
    }

    /// Centre `(offset, height)` in the meridian plane.
    pub fn center(&self) -> (f64, f64) {
        let height = match self.kind {
            SphereKind::Interior => -self.sigma * self.radius,
            SphereKind::Exterior => self.sigma * self.radius,
        };
        (self.offset, height)
    }

    /// Radius of the trace on `{x_{n+1} = 0}`.
    pub fn trace_radius(&self) -> f64 {
        self.radius * (1.0 - self.sigma * self.sigma).sqrt()
    }

    /// Signed Euclidean distance `|P - C| - R` of a meridian-plane point.
    pub fn signed_distance(&self, (rho, x): (f64, f64)) -> f64 {
        let (cx, cy) = self.center();
        (rho - cx).hypot(x - cy) - self.radius
    }

    /// Radial height of the far intersection of the ray through `z = (sin t, cos t)`.
    ///
    /// Solves `|e^v z - C| = R` for the larger root; `None` if the ray misses.
    pub fn radial_height(&self, t: f64) -> Option<f64> {
        let (s, c) = t.sin_cos();
        let (cx, cy) = self.center();
        let zc = s * cx + c * cy;
        let disc = zc * zc - (cx * cx + cy * cy - self.radius * self.radius);
        if disc < 0.0 {
            return None;
        }
        let root = zc + disc.sqrt();
        (root > 0.0).then(|| root.ln())
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > -1.0 && sigma < 1.0) {
        return Err(invalid("sigma", "sigma out of (-1,1)"));
    }
    Ok(())
}

/// Radial height of the axis-centred interior sphere of radius `radius`.
///
/// `v = log R + log( sqrt(1 - sigma^2 (1 - y^2)) - sigma y )`, `y = cos theta`.
pub fn cap_height_field(radius: f64, sigma: f64, grid: Arc<MeridianGrid>) -> Result<HeightField> {
    check_sigma(sigma)?;
    if !(radius > 0.0) {
        return Err(invalid("radius", "sphere radius must be > 0"));
    }
    let log_r = radius.ln();
    HeightField::from_fn(grid, |t| {
        let y = t.cos();
        log_r + ((1.0 - sigma * sigma * (1.0 - y * y)).sqrt() - sigma * y).ln()
    })
}

/// Radius of the interior sphere through the circle of radius `r` at height `eps`.
///
/// Positive root of `R^2 = (eps + sigma R)^2 + r^2`.
pub fn radius_from_boundary(r: f64, sigma: f64, eps: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if !(r > 0.0) {
        return Err(invalid("r", "boundary radius must be > 0"));
    }
    if !(eps >= 0.0) {
        return Err(invalid("eps", "lift height must be >= 0"));
    }
    let one_minus = 1.0 - sigma * sigma;
    let disc = eps * eps * sigma * sigma + one_minus * (eps * eps + r * r);
    Ok((eps * sigma + disc.sqrt()) / one_minus)
}

/// The cap through the lifted boundary of `domain`: the exact CMC-`sigma` solution.
pub fn boundary_cap(domain: &Domain, sigma: f64) -> Result<EquidistanceSphere> {
    let (left, right) = domain.boundary_points();
    let half = 0.5 * (right - left);
    let radius = radius_from_boundary(half, sigma, domain.eps)?;
    EquidistanceSphere::new(sigma, radius, domain.center(), SphereKind::Interior)
}

/// Height field of `sphere` sampled on `grid`.
pub fn sphere_height_field(
    sphere: &EquidistanceSphere,
    grid: Arc<MeridianGrid>,
) -> Result<HeightField> {
    let v: Option<Vec<f64>> = grid
        .theta()
        .iter()
        .map(|&t| sphere.radial_height(t))
        .collect();
    let v =
        v.ok_or_else(|| Error::Refused("sphere does not cover the grid as a radial graph".into()))?;
    HeightField::new(grid, v)
}

/// Barrier balls tangent to the lifted boundary at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierRadii {
    pub r1: f64,
    pub a1: f64,
    pub r2: f64,
    pub a2: f64,
}

/// `R_i = (-(-1)^i eps sigma0 + sqrt(eps^2 + delta_i^2 (1 - sigma0^2))) / (1 - sigma0^2)`,
/// `a_i = (-1)^i R_i sigma0`.
pub fn barrier_radii(delta1: f64, delta2: f64, eps: f64, sigma0: f64) -> Result<BarrierRadii> {
    if !(0.0..1.0).contains(&sigma0) {
        return Err(invalid("sigma0", "sigma0 must lie in [0, 1)"));
    }
    if !(delta1 > 0.0 && delta2 > 0.0) {
        return Err(invalid("delta", "tangency radii must be > 0"));
    }
    if !(eps >= 0.0) {
        return Err(invalid("eps", "lift height must be >= 0"));
    }
    let one_minus = 1.0 - sigma0 * sigma0;
    let radius = |sign: f64, delta: f64| {
        (-sign * eps * sigma0 + (eps * eps + delta * delta * one_minus).sqrt()) / one_minus
    };
    let r1 = radius(-1.0, delta1);
    let r2 = radius(1.0, delta2);
    Ok(BarrierRadii {
        r1,
        a1: -r1 * sigma0,
        r2,
        a2: r2 * sigma0,
    })
}

/// Hyperplane `x.e1 + slope x_{n+1} = offset` in the meridian plane, as a radial graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentPlane {
    pub offset: f64,
    pub slope: f64,
    /// `+1` if `e1` points towards increasing angle, `-1` otherwise.
    pub orientation: f64,
}

impl TangentPlane {
    /// CMC-`sigma` plane with `slope = sigma / sqrt(1 - sigma^2)` meeting the ideal boundary at `offset`.
    pub fn with_sigma(p0_dot_e1: f64, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Self {
            offset: p0_dot_e1,
            slope: sigma / (1.0 - sigma * sigma).sqrt(),
            orientation: 1.0,
        })
    }

    /// Plane tangent to `sphere` at the meridian-plane point `p` on it.
    pub fn touching(sphere: &EquidistanceSphere, p: (f64, f64)) -> Self {
        let (cx, cy) = sphere.center();
        let (nx, ny) = (p.0 - cx, p.1 - cy);
        let orientation = nx.signum();
        let slope = ny / nx.abs();
        Self {
            offset: orientation * p.0 + slope * p.1,
            slope,
            orientation,
        }
    }

    /// Mean curvature of the plane for the normal pointing away from the origin side.
    pub fn mean_curvature(&self) -> f64 {
        self.slope / (1.0 + self.slope * self.slope).sqrt()
    }

    /// `eta(z) = log( offset / (slope y + z.e1) )`.
    pub fn eta(&self, t: f64) -> Result<f64> {
        let (s, y) = t.sin_cos();
        let denom = self.slope * y + self.orientation * s;
        if !(denom > 0.0) {
            return Err(Error::OutsideHalfSpace(denom));
        }
        Ok((self.offset / denom).ln())
    }

    pub fn field(&self, grid: Arc<MeridianGrid>) -> Result<HeightField> {
        let v = grid
            .theta()
            .iter()
            .map(|&t| self.eta(t))
            .collect::<Result<Vec<_>>>()?;
        HeightField::new(grid, v)
    }
}

/// Radial height of the CMC-`sigma` hyperplane through `P0` with exterior normal `e1`.
pub fn tangent_plane_eta(
    p0_dot_e1: f64,
    sigma: f64,
    grid: Arc<MeridianGrid>,
) -> Result<HeightField> {
    TangentPlane::with_sigma(p0_dot_e1, sigma)?.field(grid)
}

/// Horosphere `{x_{n+1} = c}`: `v = log(c / cos theta)`.
pub fn horosphere_field(c: f64, grid: Arc<MeridianGrid>) -> Result<HeightField> {
    if !(c > 0.0) {
        return Err(invalid("c", "horosphere height must be > 0"));
    }
    HeightField::from_fn(grid, |t| (c / t.cos()).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{boundary_angle, embed, mean_curvature};

    fn axis_grid(n: usize, theta_b: f64, nodes: usize) -> Arc<MeridianGrid> {
        Arc::new(MeridianGrid::axisymmetric(n, theta_b, nodes).unwrap())
    }

    #[test]
    fn zero_sigma_cap_is_centered_hemisphere() {
        let f = cap_height_field(1.7, 0.0, axis_grid(2, 1.4, 30)).unwrap();
        assert!(f.values().iter().all(|v| (v - 1.7f64.ln()).abs() < 1e-15));
    }

    #[test]
    fn cap_points_lie_on_sphere() {
        for sigma in [-0.7, -0.2, 0.0, 0.4, 0.9] {
            let radius = 1.3;
            let f = cap_height_field(radius, sigma, axis_grid(3, 1.5, 101)).unwrap();
            let sphere = EquidistanceSphere::centered(sigma, radius).unwrap();
            for p in embed(&f) {
                assert!(sphere.signed_distance(p).abs() < 1e-13);
            }
            let g = sphere_height_field(&sphere, f.grid_arc().clone()).unwrap();
            assert!(g.max_abs_diff(&f) < 1e-13);
        }
    }

    #[test]
    fn cap_top_and_trace() {
        let radius = 2.0 / 3f64.sqrt();
        let f = cap_height_field(radius, 0.5, axis_grid(2, 1.0, 11)).unwrap();
        assert!((f.values()[0].exp() - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        let sphere = EquidistanceSphere::centered(0.5, radius).unwrap();
        assert!((sphere.trace_radius() - 1.0).abs() < 1e-15);
        // ray towards the ideal boundary point (1, 0)
        let v = sphere.radial_height(std::f64::consts::FRAC_PI_2).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn radius_from_boundary_values() {
        let r0 = radius_from_boundary(1.0, 0.5, 0.0).unwrap();
        assert!((r0 - 2.0 / 3f64.sqrt()).abs() < 1e-15);
        let r1 = radius_from_boundary(1.0, 0.5, 0.1).unwrap();
        assert!((r1 - 1.229_039_718_277_513).abs() < 1e-14);
        assert!((0.75 * r1 * r1 - 0.1 * r1 - 1.01).abs() < 1e-13);
        let r2 = radius_from_boundary(1.3, 0.0, 0.2).unwrap();
        assert!((r2 - (1.69f64 + 0.04).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn enclosing_sphere_is_tight() {
        let g = Arc::new(MeridianGrid::axisymmetric(2, 1.4, 41).unwrap());
        let cap = cap_height_field(1.3, 0.4, g).unwrap();
        let pts = crate::geometry::embed(&cap);
        let s = EquidistanceSphere::enclosing(0.4, &pts, 1.0).unwrap();
        assert!((s.radius - 1.3).abs() < 1e-12);
        let bigger = EquidistanceSphere::enclosing(0.4, &pts, 1.01).unwrap();
        assert!(pts.iter().all(|&p| bigger.signed_distance(p) < 0.0));
    }

    #[test]
    fn barrier_radii_values() {
        let b = barrier_radii(1.0, 1.0, 0.0, 0.6).unwrap();
        assert!((b.r1 - 1.25).abs() < 1e-15 && (b.a1 + 0.75).abs() < 1e-15);
        assert!((b.r2 - 1.25).abs() < 1e-15 && (b.a2 - 0.75).abs() < 1e-15);
        let b = barrier_radii(0.3, 0.7, 0.05, 0.0).unwrap();
        assert!((b.r1 - (0.0025f64 + 0.09).sqrt()).abs() < 1e-15);
        assert!((b.r2 - (0.0025f64 + 0.49).sqrt()).abs() < 1e-15);
        assert!(barrier_radii(1.0, 1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn barrier_balls_touch_the_lifted_boundary() {
        let (eps, s, d1, d2) = (0.07, 0.6, 0.4, 0.3);
        let b = barrier_radii(d1, d2, eps, s).unwrap();
        // horizontal half-chord at height eps equals the tangency radius
        assert!((b.r1 * b.r1 - (eps - b.a1).powi(2) - d1 * d1).abs() < 1e-14);
        assert!((b.r2 * b.r2 - (eps - b.a2).powi(2) - d2 * d2).abs() < 1e-14);
    }

    #[test]
    fn tangent_plane_values() {
        let grid = Arc::new(MeridianGrid::meridian(0.1, 1.2, 12).unwrap());
        let p0 = 0.9;
        let eta = tangent_plane_eta(p0, 0.0, grid.clone()).unwrap();
        for (t, e) in grid.theta().iter().zip(eta.values()) {
            assert!((e - (p0.ln() - t.sin().ln())).abs() < 1e-15);
        }
        let plane = TangentPlane::with_sigma(1.0, 0.5).unwrap();
        // z with z.e1 = 0.8, y = 0.2 (not unit, evaluated through the formula)
        let lambda = plane.slope;
        let eta = (1.0f64 / (lambda * 0.2 + 0.8)).ln();
        assert!((eta - 0.088_317_625_574_133_67).abs() < 1e-15);
        let x = eta.exp();
        assert!((x * 0.8 + lambda * x * 0.2 - 1.0).abs() < 1e-15);
        assert!((plane.mean_curvature() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tangent_plane_outside_half_space_is_error() {
        let grid = Arc::new(MeridianGrid::meridian(-1.2, 0.3, 12).unwrap());
        assert!(matches!(
            tangent_plane_eta(1.0, 0.0, grid),
            Err(Error::OutsideHalfSpace(_))
        ));
    }

    #[test]
    fn touching_plane_contains_the_point() {
        let sphere = EquidistanceSphere::centered(0.5, 1.2).unwrap();
        let t = 1.3;
        let v = sphere.radial_height(t).unwrap();
        let p = (v.exp() * t.sin(), v.exp() * t.cos());
        let plane = TangentPlane::touching(&sphere, p);
        assert!((plane.eta(t).unwrap() - v).abs() < 1e-14);
    }

    #[test]
    fn horosphere_matches_boundary_value() {
        let (tb, phi) = boundary_angle(1.0, 0.1).unwrap();
        let f = horosphere_field(0.1, axis_grid(2, tb, 9)).unwrap();
        assert!((f.values()[8] - phi).abs() < 1e-14);
        assert_eq!(f.values()[0], 0.1f64.ln());
        let h = horosphere_field(1.0, axis_grid(2, tb, 9)).unwrap();
        assert_eq!(h.values()[0], 0.0);
        let hc = mean_curvature(&horosphere_field(0.4, axis_grid(3, 1.2, 401)).unwrap()).unwrap();
        assert!(hc[..400].iter().all(|x| (x - 1.0).abs() < 1e-3));
    }
}
