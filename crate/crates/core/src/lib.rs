//! Bilinear (multiplicative) control of the heat equation with a potential,
//! `u_t = Δu + v(x,t) u`, on axis-aligned boxes with Dirichlet boundaries.
//!
//! The crate builds piecewise-constant-in-time controls that steer a state
//! with a given set of axis-aligned sign-change hyperplanes to another state
//! with the same number of hyperplanes at different positions, and checks
//! the numerical claims along the way.
//!
//! Layout:
//! - [`grid`]: tensor grids, grid functions, trapezoidal quadrature.
//! - [`sign`]: sign patterns and maximum-principle checks.
//! - [`spectral`]: 1-D Dirichlet eigenproblems, target potentials, tensor bases.
//! - [`solver`]: Crank–Nicolson / ADI time stepping and diagnostics.
//! - [`synthesis`]: log controls, spectral shift, moment problem on a cone.
//! - [`profile`]: target profiles with prescribed zeros.
//! - [`pipeline`]: the four-stage steering plan, execution and sweeps.
//! - [`config`]: experiment configs and the runner behind the binary.

pub mod config;
pub mod error;
pub mod grid;
pub mod pipeline;
pub mod profile;
pub mod sign;
pub mod solver;
pub mod spectral;
pub mod synthesis;
mod tridiag;

pub use error::{Result, SteerError};
pub use grid::{BoxDomain, Grid, Grid1D, GridFunction, Interval};
pub use sign::SignPattern;
pub use solver::{ControlSchedule, Stage, Trajectory};
pub use spectral::{SpectralBasis1D, SpectralBasisND};
