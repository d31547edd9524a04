//! Pointwise geometry of radial graphs reduced to one angular variable.
//!
//! With `p = v_theta`, `q = v_thetatheta` and `y = cos(theta)`:
//!
//! ```text
//! w       = sqrt(1 + p^2)
//! e.grad v = -sin(theta) p
//! a       = q / w^2 + (n - 1) cot(theta) p        (pole: (n - 1) q)
//! H       = y a / (n w) - (e.grad v) / w
//! ```
//!
//! `H` is the hyperbolic mean curvature for the outward normal
//! `nu_E = (z - grad v) / w`. Dirichlet end nodes use one-sided second order
//! stencils; those values are for diagnostics only and never drive the flow.

use crate::error::{invalid, Error, Result};
use crate::grid::{HeightField, MeridianGrid, Topology, MIN_NODES};

#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

/// First and second angular derivatives of `v` at node `i`.
///
/// Interior nodes use central differences; the axisymmetric pole uses the even
/// ghost node `v[-1] = v[1]`; end nodes use one-sided second order stencils.
#[inline]
pub(crate) fn stencil(grid: &MeridianGrid, v: &[f64], i: usize) -> (f64, f64) {
    let h = grid.h();
    let last = v.len() - 1;
    if i == 0 {
        match grid.topology() {
            Topology::Axisymmetric => (0.0, 2.0 * (v[1] - v[0]) / (h * h)),
            Topology::Meridian => (
                (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h),
                (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h),
            ),
        }
    } else if i == last {
        (
            (3.0 * v[i] - 4.0 * v[i - 1] + v[i - 2]) / (2.0 * h),
            (2.0 * v[i] - 5.0 * v[i - 1] + 4.0 * v[i - 2] - v[i - 3]) / (h * h),
        )
    } else {
        (
            (v[i + 1] - v[i - 1]) / (2.0 * h),
            (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h),
        )
    }
}

fn check_size(grid: &MeridianGrid) -> Result<()> {
    if grid.len() < MIN_NODES {
        return Err(Error::GridTooSmall {
            nodes: grid.len(),
            min: MIN_NODES,
        });
    }
    Ok(())
}

pub fn derivatives(field: &HeightField) -> Result<Derivatives> {
    let grid = field.grid();
    check_size(grid)?;
    let v = field.values();
    let (first, second) = (0..v.len()).map(|i| stencil(grid, v, i)).unzip();
    Ok(Derivatives { first, second })
}

/// Reduced quantities at one node, shared by the flow, the elliptic solver and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct NodeTerms {
    pub y: f64,
    pub sin: f64,
    pub w: f64,
    pub e_dot_grad_v: f64,
    /// Coefficient of `p` in the Laplacian part of `a`: `(n-1) cot(theta)`, zero at the pole.
    pub cot_term: f64,
    pub a_op: f64,
}

#[inline]
pub(crate) fn node_terms(grid: &MeridianGrid, i: usize, p: f64, q: f64) -> NodeTerms {
    let theta = grid.theta()[i];
    let n = grid.n() as f64;
    let (sin, y) = theta.sin_cos();
    let w = (1.0 + p * p).sqrt();
    let pole = grid.topology() == Topology::Axisymmetric && i == 0;
    let (cot_term, laplace_extra) = if grid.n() == 1 {
        (0.0, 0.0)
    } else if pole {
        // cot(theta) v_theta -> v_thetatheta as theta -> 0
        (0.0, (n - 1.0) * q)
    } else {
        let c = (n - 1.0) * y / sin;
        (c, c * p)
    };
    NodeTerms {
        y,
        sin,
        w,
        e_dot_grad_v: -sin * p,
        cot_term,
        a_op: q / (w * w) + laplace_extra,
    }
}

/// Per-node geometric quantities of a radial graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseGeometry {
    pub v_theta: Vec<f64>,
    pub v_thetatheta: Vec<f64>,
    pub w: Vec<f64>,
    pub e_dot_grad_v: Vec<f64>,
    pub a_op: Vec<f64>,
    /// Hyperbolic mean curvature.
    pub h: Vec<f64>,
    /// Embedded height `y e^v`.
    pub u: Vec<f64>,
    /// Vertical component of the Euclidean unit normal.
    pub e_dot_nu_e: Vec<f64>,
}

impl PointwiseGeometry {
    pub fn compute(field: &HeightField) -> Result<Self> {
        let grid = field.grid();
        check_size(grid)?;
        let v = field.values();
        let len = v.len();
        let mut g = PointwiseGeometry {
            v_theta: Vec::with_capacity(len),
            v_thetatheta: Vec::with_capacity(len),
            w: Vec::with_capacity(len),
            e_dot_grad_v: Vec::with_capacity(len),
            a_op: Vec::with_capacity(len),
            h: Vec::with_capacity(len),
            u: Vec::with_capacity(len),
            e_dot_nu_e: Vec::with_capacity(len),
        };
        let n = grid.n() as f64;
        for i in 0..len {
            let (p, q) = stencil(grid, v, i);
            let t = node_terms(grid, i, p, q);
            g.v_theta.push(p);
            g.v_thetatheta.push(q);
            g.w.push(t.w);
            g.e_dot_grad_v.push(t.e_dot_grad_v);
            g.a_op.push(t.a_op);
            g.h.push(t.y * t.a_op / (n * t.w) - t.e_dot_grad_v / t.w);
            g.u.push(t.y * v[i].exp());
            g.e_dot_nu_e.push((t.y - t.e_dot_grad_v) / t.w);
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn w_max(&self) -> f64 {
        self.w.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn mean_curvature(field: &HeightField) -> Result<Vec<f64>> {
    Ok(PointwiseGeometry::compute(field)?.h)
}

/// Hyperbolic mean curvature assembled from the Euclidean one:
/// `H = u H_E + e.nu_E` with `H_E = (a - n) / (n e^v w)`.
pub fn mean_curvature_via_euclidean(field: &HeightField) -> Result<Vec<f64>> {
    let grid = field.grid();
    check_size(grid)?;
    let v = field.values();
    let n = grid.n() as f64;
    Ok((0..v.len())
        .map(|i| {
            let (p, q) = stencil(grid, v, i);
            let t = node_terms(grid, i, p, q);
            let ev = v[i].exp();
            let h_euclid = (t.a_op - n) / (n * ev * t.w);
            let u = t.y * ev;
            u * h_euclid + (t.y - t.e_dot_grad_v) / t.w
        })
        .collect())
}

/// Meridian profile `(rho, x_{n+1}) = e^v (sin theta, cos theta)` of the surface.
pub fn embed(field: &HeightField) -> Vec<(f64, f64)> {
    field
        .grid()
        .theta()
        .iter()
        .zip(field.values())
        .map(|(t, v)| {
            let (s, c) = t.sin_cos();
            let r = v.exp();
            (r * s, r * c)
        })
        .collect()
}

/// Boundary angle of the lifted boundary point at horizontal distance `r` and height `eps`.
///
/// Returns `(theta_b, phi)` with `tan theta_b = r / eps` and `phi = log sqrt(r^2 + eps^2)`.
/// `eps = 0` is accepted here (it yields `theta_b = pi/2`) but is rejected by the flow.
pub fn boundary_angle(r: f64, eps: f64) -> Result<(f64, f64)> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid("r", "boundary radius must be > 0"));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(invalid("eps", "lift height must be >= 0"));
    }
    Ok((r.atan2(eps), 0.5 * (r * r + eps * eps).ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};
    use std::sync::Arc;

    fn axis_grid(n: usize, theta_b: f64, nodes: usize) -> Arc<MeridianGrid> {
        Arc::new(MeridianGrid::axisymmetric(n, theta_b, nodes).unwrap())
    }

    #[test]
    fn constant_field_has_zero_derivatives_and_curvature() {
        let f = HeightField::from_fn(axis_grid(3, 1.3, 40), |_| 0.7).unwrap();
        let d = derivatives(&f).unwrap();
        assert!(d.first.iter().chain(&d.second).all(|x| x.abs() < 1e-9));
        assert!(mean_curvature(&f).unwrap().iter().all(|h| h.abs() < 1e-9));
    }

    #[test]
    fn central_stencil_is_exact_on_quadratics() {
        let f = HeightField::from_fn(axis_grid(2, 1.0, 21), |t| t * t).unwrap();
        let d = derivatives(&f).unwrap();
        for (i, t) in f.grid().theta().iter().enumerate() {
            assert!((d.first[i] - 2.0 * t).abs() < 1e-12, "node {i}");
            assert!((d.second[i] - 2.0).abs() < 1e-9, "node {i}");
        }
    }

    #[test]
    fn first_derivative_error_respects_taylor_bound() {
        // |error| <= h^2/6 max|v'''| = 1e-4/6 for v = sin
        let g = Arc::new(MeridianGrid::meridian(-1.0, 1.0, 201).unwrap());
        let f = HeightField::from_fn(g, f64::sin).unwrap();
        let d = derivatives(&f).unwrap();
        let err = (1..200)
            .map(|i| (d.first[i] - f.grid().theta()[i].cos()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-4 / 6.0 + 1e-12, "err = {err}");
        assert!(err > 1e-6);
    }

    #[test]
    fn too_small_grid_is_rejected() {
        // grids can't be built below MIN_NODES, so exercise the check directly
        let g = MeridianGrid::axisymmetric(2, 1.0, 5).unwrap();
        assert!(check_size(&g).is_ok());
        assert!(matches!(
            MeridianGrid::axisymmetric(2, 1.0, 3),
            Err(Error::GridTooSmall { .. })
        ));
    }

    #[test]
    fn horosphere_has_unit_curvature_and_flat_embedding() {
        let c = 0.3;
        let f = HeightField::from_fn(axis_grid(2, 1.4, 201), |t| (c / t.cos()).ln()).unwrap();
        let g = PointwiseGeometry::compute(&f).unwrap();
        for i in 0..200 {
            assert!((g.h[i] - 1.0).abs() < 5e-3, "node {i}: {}", g.h[i]);
        }
        for (_, x) in embed(&f) {
            assert!((x - c).abs() < 1e-14);
        }
    }

    #[test]
    fn two_curvature_routes_agree() {
        for n in [2, 3, 5] {
            let f = HeightField::from_fn(axis_grid(n, 1.2, 60), |t| {
                0.3 * (2.0 * t).cos() - 0.1 * t * t
            })
            .unwrap();
            let a = mean_curvature(&f).unwrap();
            let b = mean_curvature_via_euclidean(&f).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn w_is_at_least_one() {
        let f = HeightField::from_fn(axis_grid(2, 1.4, 50), |t| 3.0 * t.sin()).unwrap();
        assert!(PointwiseGeometry::compute(&f)
            .unwrap()
            .w
            .iter()
            .all(|&w| w >= 1.0));
    }

    #[test]
    fn identity_graph_embeds_on_unit_circle() {
        let f = HeightField::from_fn(axis_grid(2, 1.0, 11), |_| 0.0).unwrap();
        for ((rho, x), t) in embed(&f).into_iter().zip(f.grid().theta()) {
            assert!((rho - t.sin()).abs() < 1e-15 && (x - t.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn boundary_angle_values() {
        let (tb, phi) = boundary_angle(1.0, 1.0).unwrap();
        assert!((tb - FRAC_PI_4).abs() < 1e-15);
        assert!((phi - 2f64.sqrt().ln()).abs() < 1e-15);

        let (tb, phi) = boundary_angle(1.0, 0.1).unwrap();
        assert!((tb - 1.471_127_674_303_734_7).abs() < 1e-12);
        assert!((phi - 0.004_975_165_426_584_3).abs() < 1e-12);
        assert!((tb.cos() - 0.1 / 1.01f64.sqrt()).abs() < 1e-15);

        let (tb, phi) = boundary_angle(2.0, 0.0).unwrap();
        assert!((tb - PI / 2.0).abs() < 1e-15);
        assert!((phi - 2f64.ln()).abs() < 1e-15);
        assert!(boundary_angle(-1.0, 0.1).is_err());
        assert!(boundary_angle(1.0, -0.1).is_err());
    }
}
