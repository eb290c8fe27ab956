//! Edge-frame solver for the free boundary problem of branching Brownian
//! motions with leftmost-particle selection and nonlocal offspring placement.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! numerics; configuration files, output formats and the command line live
//! in the `freefront` companion crate.
//!
//! Module map:
//!
//! - [`kernels`]: heat kernel, quarter-plane Green function, weakly singular
//!   time quadrature and boundary layer potentials.
//! - [`model`]: branching kernel `q`, initial datum `rho0`, the nonlocal terms
//!   and datum calibration.
//! - [`frame_solver`]: causal time-marching of the integral representations
//!   for `rho`, `u`, `u_x`, `u_xx` at a fixed velocity path.
//! - [`front`]: the velocity map `Q`, the damped fixed-point iteration, lab
//!   frame reconstruction and the contract report.
//! - [`fd_oracle`]: an independent Crank–Nicolson solver used for
//!   cross-validation.
//! - [`particles`]: the N-particle branching/selection Monte Carlo oracle.
//! - [`variants`]: the local N-BBM chain and the edge-value problems.

#![cfg_attr(not(test), no_std)]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` style tests reject NaN along with the failing range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

mod error;
pub(crate) mod math;

pub mod fd_oracle;
pub mod frame_solver;
pub mod front;
pub mod kernels;
pub mod model;
pub mod particles;
pub mod variants;

pub use error::{Error, Result};
pub use frame_solver::{FieldGrid, GridSpec};
pub use front::{FrontSolution, VelocityPath};
pub use model::{BranchingKernel, InitialDatum};

/// Quadrature helpers that are also useful to downstream crates.
pub mod quadrature {
    pub use crate::math::{simpson, GaussLegendre};
}
