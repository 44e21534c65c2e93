//! Solver library for the one-dimensional damped wave system
//!
//! The model is the first-order system on (0, 1)
//!
//! ```text
//!   du/dt + dp/dx + a(x) u = f,      dp/dt + du/dx = g,      p(0) = p(1) = 0,
//! ```
//!
//! with a nonnegative damping coefficient `a`. Space is discretized with a
//! mixed pair on a uniform mesh: continuous piecewise polynomials of degree
//! k+1 for `u` and discontinuous piecewise polynomials of degree k for `p`,
//! so that the broken space is exactly the image of the continuous space
//! under d/dx. Time is discretized with the one-parameter theta scheme,
//! including the choice theta = 1/2 + tau that is second-order accurate and
//! uniformly exponentially stable in the mesh parameters.
//!
//! Modules:
//! - [`mesh`], [`quadrature`], [`space`]: uniform 1D meshes, Gauss rules,
//!   Lagrange finite element spaces and functions.
//! - [`damping`]: the damping coefficient `a(x)` with its bounds.
//! - [`assembly`]: mass, damping and coupling matrices plus loads,
//!   projections and norms.
//! - [`stationary`]: direct and Schur-complement solvers for the stationary
//!   saddle-point problem.
//! - [`stepper`]: the factor-once theta-scheme time stepper, discrete
//!   energies of any difference order, and energy histories.
//! - [`analysis`]: decay-rate fits, operator norms by power iteration,
//!   stability constants, the analytic separable solution and convergence
//!   studies.
//! - [`linalg`]: banded LU / Cholesky factorizations and block-diagonal
//!   helpers used by everything above.

pub mod analysis;
pub mod assembly;
pub mod damping;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod space;
pub mod stationary;
pub mod stepper;

pub use error::{Error, Result};
