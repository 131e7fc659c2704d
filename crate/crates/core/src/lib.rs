//! Equal-weight (Chebyshev-type) quadrature on an interval and local approximate
//! Chebyshev-type cubature on spheres and cylinders.
//!
//! The crate is `no_std` and needs only `alloc`. Everything that touches files,
//! threads or the command line lives in the `chebyquad` companion crate.
//!
//! Layout:
//! * [`measure`]: probability measures on a bounded interval (atoms plus densities).
//! * [`momentmap`]: power-sum maps, their Jacobians and Vandermonde norms.
//! * [`quadrature`]: the node construction (quantile seeding, subset selection,
//!   moment-correcting flow, large-atom decomposition).
//! * [`bounds`]: closed-form upper and lower bounds on the node count.
//! * [`orthopoly`]: recurrence coefficients and Gauss rules.
//! * [`sphere`] and [`cylinder`]: local cubature point sets.
//! * [`random`]: Monte-Carlo small-ball experiments on the cube.
//! * [`verify`]: residuals, reference integration and an independent Newton solver.
#![no_std]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod config;
pub mod cylinder;
mod error;
pub mod linalg;
pub mod math;
pub mod measure;
pub mod momentmap;
pub mod orthopoly;
pub mod quadrature;
pub mod random;
pub mod sphere;
pub mod verify;

pub use error::{Error, Result};
pub use measure::Measure1D;
pub use quadrature::{Mode, QuadratureResult};
