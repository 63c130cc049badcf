//! Periodic-grid Fourier infrastructure.

mod fft;
mod field;
mod grid;
mod littlewood_paley;
mod multipliers;
mod norms;

pub use field::{sample_nodes, PointEvaluator, SpectralField, VectorField};
pub use grid::GridSpec;
pub use littlewood_paley::{
    dyadic_decompose, high_pass, homogeneous_block, homogeneous_block_range, inhomogeneous_block,
    low_pass, lp_profile, top_block_index, DyadicBlockSet,
};
pub use multipliers::{biot_savart, fractional_laplacian, minus_perp_gradient, spectral_cutoff};
pub use norms::{
    bernstein_check, besov_norm, homogeneous_besov_norm, homogeneous_sobolev_norm, lp_norm,
    lp_norm_values, sobolev_norm, BernsteinReport,
};
