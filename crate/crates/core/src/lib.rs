//! Polyharmonic spline approximation toolkit.
//!
//! The pieces fit together as a pipeline:
//!
//! * [`kernels`] evaluates the radial family `phi_{d,k}` and its zonal
//!   restriction to the sphere, including the `rho`-rescaled variants;
//! * [`stencil`] builds the exact integer coefficients of the k-fold
//!   discrete Laplacian;
//! * [`bspline`] combines the two into localized B-splines, calibrating the
//!   partition-of-unity normalizer and the lattice-sum operator bounds;
//! * [`quasi`] runs the semi-discrete convolution quasi-interpolant on grids
//!   and on masked domains;
//! * [`sphere`] fits linear combinations of zonal translates to boundary
//!   data by regularized least squares;
//! * [`gegenbauer`] computes Fourier-Gegenbauer coefficients of the
//!   restricted kernels (closed form and quadrature), decides fundamentality
//!   on the sphere, and enumerates the degenerate radii of the rescaled
//!   family;
//! * [`ball`] assembles the two-stage approximant on the closed unit ball
//!   with every kernel translate kept inside the ball.

pub mod ball;
pub mod bspline;
pub mod config;
pub mod gegenbauer;
pub mod kernels;
pub mod linalg;
pub mod quad;
pub mod quasi;
pub mod special;
pub mod sphere;
pub mod stencil;

pub use bspline::{BsplineCalibration, CalibrationStore};
pub use kernels::KernelSpec;
pub use stencil::{build_stencil, Stencil};
