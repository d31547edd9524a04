//! Modified mean curvature flow of radial graphs in the half-space model of
//! hyperbolic space, with exact equidistance-sphere solutions, a Newton solver
//! for the stationary constant mean curvature problem, and trajectory checks.

// `!(x > 0.0)` style tests are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cmc;
pub mod diagnostics;
pub mod error;
pub mod exact;
pub mod exec;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod tridiag;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Execution;
pub use grid::{Boundary, Domain, HeightField, MeridianGrid, Snapshot, Topology};
