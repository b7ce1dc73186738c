//! Tensor-product B-spline quasi-interpolants compiled into exact ReLU^k
//! networks, plus the harness used to study simultaneous approximation
//! (values and derivatives) on the cube, the sphere, and an embedded torus.
//!
//! Layout:
//! - [`spline`]: knot vectors, B-spline evaluation, dual functionals,
//!   quasi-interpolation, Sobolev error measurement.
//! - [`net`]: explicit piecewise-polynomial networks (powers of ReLU),
//!   exact compilation of spline quasi-interpolants (plain and
//!   bounded-weight), derivative networks, serialization.
//! - [`manifold`]: sphere/torus sampling, tangential gradients,
//!   Laplace–Beltrami operators, reference targets.
//! - [`train`]: deterministic MLP training (Adam) with the stabilization
//!   stack needed for high-exponent activations, and surface metrics.
//! - [`experiment`]: the four CSV-emitting experiment suites behind the CLI.

pub mod error;
pub mod experiment;
pub mod linalg;
pub mod manifold;
pub mod net;
pub mod spline;
pub mod train;

pub use error::{Error, Result};
