//! Pseudo-spectral simulation of the generalized surface quasi-geostrophic
//! (gSQG) vortex-wave system: a smooth active scalar `θ` on a periodic torus
//! coupled to singular point vortices.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: grids, Fourier-coefficient fields, fractional Laplacians,
//!   the Biot-Savart multiplier, Littlewood-Paley blocks and norms.
//! * [`kernels`]: closed-form kernels `K_s`, the cutoff `χ_ε` and the
//!   regularized kernels `K_{s,ε}`.
//! * [`pointvortex`]: the N-vortex ODE, its invariants and integrators.
//! * [`coupled`]: the regularized vortex-wave stepper.
//! * [`diagnostics`]: plateau radius, blow-up functional, energy, stability gap
//!   and the other monitored quantities.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod coupled;
pub mod diagnostics;
mod error;
pub mod fit;
mod geometry;
pub mod kernels;
pub mod pointvortex;
pub mod profile;
pub mod spectral;

pub use error::{Error, Result};
pub use geometry::Vec2;
