//! Littlewood-Paley blocks on the torus.
//!
//! `φ` is the pinned [`crate::profile::bump`] (1 on `|ξ| ≤ 1/2`, 0 on
//! `|ξ| ≥ 1`) and `ψ(ξ) = φ(ξ/2) − φ(ξ)`. Block `j ≥ 0` multiplies by
//! `ψ(ξ/2^j)`, the low-frequency block `j = −1` by `φ(ξ)`, and
//! `S_j` by `φ(ξ/2^j)`. Frequencies are physical wavenumbers `2πk/L`.

use super::{GridSpec, SpectralField};
use crate::profile::bump;

/// The Littlewood-Paley profile `φ(|ξ|)`.
pub fn lp_profile(r: f64) -> f64 {
    bump(r)
}

fn psi(r: f64) -> f64 {
    lp_profile(0.5 * r) - lp_profile(r)
}

fn dyadic(j: i32) -> f64 {
    2f64.powi(j)
}

/// Smallest `J ≥ 0` with `2^J ≥ max |ξ|`, so that blocks `−1..=J`
/// reconstruct every mode on the grid.
pub fn top_block_index(grid: &GridSpec) -> i32 {
    (grid.max_wavenumber().log2().ceil() as i32).max(0)
}

/// Range of homogeneous blocks that can be nonzero on the grid: from the
/// gravest lattice mode `2π/L` up to [`top_block_index`]. Blocks below the
/// returned start are identically zero except for the (excluded) zero mode.
pub fn homogeneous_block_range(grid: &GridSpec) -> std::ops::RangeInclusive<i32> {
    let lo = grid.fundamental().log2().floor() as i32;
    lo..=top_block_index(grid)
}

/// Homogeneous block `Δ̇_j f` (any integer `j`).
pub fn homogeneous_block(f: &SpectralField, j: i32) -> SpectralField {
    let scale = 1.0 / dyadic(j);
    f.apply_real_symbol(|xi| psi(xi.norm() * scale))
}

/// Inhomogeneous block `Δ_j f`, `j ≥ −1`.
pub fn inhomogeneous_block(f: &SpectralField, j: i32) -> SpectralField {
    assert!(j >= -1, "inhomogeneous blocks start at j = -1");
    if j == -1 {
        f.apply_real_symbol(|xi| lp_profile(xi.norm()))
    } else {
        homogeneous_block(f, j)
    }
}

/// Low-frequency cut `S_j f = F⁻¹[φ(2^{−j}ξ) f̂]`.
pub fn low_pass(f: &SpectralField, j: i32) -> SpectralField {
    let scale = 1.0 / dyadic(j);
    f.apply_real_symbol(|xi| lp_profile(xi.norm() * scale))
}

/// High-frequency cut `H_j f = (1 − S_j) f`.
pub fn high_pass(f: &SpectralField, j: i32) -> SpectralField {
    let scale = 1.0 / dyadic(j);
    f.apply_real_symbol(|xi| 1.0 - lp_profile(xi.norm() * scale))
}

/// The inhomogeneous decomposition `Δ_{−1} f, Δ_0 f, …, Δ_J f`.
#[derive(Debug, Clone)]
pub struct DyadicBlockSet {
    blocks: Vec<(i32, SpectralField)>,
}

impl DyadicBlockSet {
    pub fn blocks(&self) -> &[(i32, SpectralField)] {
        &self.blocks
    }

    pub fn block(&self, j: i32) -> Option<&SpectralField> {
        self.blocks.iter().find(|(i, _)| *i == j).map(|(_, b)| b)
    }

    /// Sum of all blocks.
    pub fn reconstruct(&self) -> SpectralField {
        let mut it = self.blocks.iter();
        let mut acc = it.next().expect("at least the low block").1.clone();
        for (_, b) in it {
            acc = acc.add(b).expect("blocks share a grid");
        }
        acc
    }
}

pub fn dyadic_decompose(f: &SpectralField) -> DyadicBlockSet {
    let top = top_block_index(f.grid());
    let blocks = (-1..=top).map(|j| (j, inhomogeneous_block(f, j))).collect();
    DyadicBlockSet { blocks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(grid: GridSpec, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        SpectralField::from_physical(&values, grid).unwrap()
    }

    fn max_coeff(f: &SpectralField) -> f64 {
        f.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_field_has_zero_blocks() {
        let g = GridSpec::new(2.0 * PI, 32).unwrap();
        let set = dyadic_decompose(&SpectralField::zeros(g));
        assert!(set.blocks().iter().all(|(_, b)| b.is_zero()));
    }

    #[test]
    fn reconstruction_is_exact() {
        for &l in &[1.0, 2.0 * PI, 40.0] {
            let g = GridSpec::new(l, 64).unwrap();
            let f = random_field(g, 9);
            let set = dyadic_decompose(&f);
            let err = max_coeff(&set.reconstruct().sub(&f).unwrap());
            assert!(err < 1e-12, "L = {l}: reconstruction error {err}");
        }
    }

    #[test]
    fn block_support_is_dyadic_annulus() {
        let g = GridSpec::new(2.0 * PI, 64).unwrap();
        let f = random_field(g, 4);
        for (j, b) in dyadic_decompose(&f).blocks() {
            for (idx, c) in b.coeffs().iter().enumerate() {
                if *c == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let r = g.wavevector(idx).norm();
                if *j == -1 {
                    assert!(r <= 1.0);
                } else {
                    let lo = 2f64.powi(j - 1);
                    let hi = 2f64.powi(j + 1);
                    assert!(r >= lo && r <= hi, "block {j} holds |ξ| = {r}");
                }
            }
        }
    }

    #[test]
    fn single_mode_lands_in_adjacent_blocks() {
        // |ξ| = 3·2^2 = 12 on L = 2π: only blocks with |j − log₂ 12| ≤ 1.
        let g = GridSpec::new(2.0 * PI, 64).unwrap();
        let mut f = SpectralField::zeros(g);
        f.coeffs_mut()[12] = Complex64::new(1.0, 0.0);
        f.coeffs_mut()[64 - 12] = Complex64::new(1.0, 0.0);
        let target = 12f64.log2();
        for (j, b) in dyadic_decompose(&f).blocks() {
            let expected = psi_weight(*j, 12.0);
            if (*j as f64 - target).abs() > 1.0 {
                assert!(b.is_zero(), "block {j} should be empty");
                assert_eq!(expected, 0.0);
            } else {
                assert!((b.coeffs()[12].re - expected).abs() < 1e-15);
            }
        }
    }

    fn psi_weight(j: i32, r: f64) -> f64 {
        if j == -1 {
            lp_profile(r)
        } else {
            let t = r / 2f64.powi(j);
            lp_profile(t / 2.0) - lp_profile(t)
        }
    }

    #[test]
    fn low_and_high_pass_partition() {
        let g = GridSpec::new(3.0, 32).unwrap();
        let f = random_field(g, 8);
        for j in -2..6 {
            let sum = low_pass(&f, j).add(&high_pass(&f, j)).unwrap();
            assert!(max_coeff(&sum.sub(&f).unwrap()) < 1e-15);
        }
    }

    #[test]
    fn homogeneous_blocks_reconstruct_nonzero_modes() {
        let g = GridSpec::new(10.0, 32).unwrap();
        let mut f = random_field(g, 12);
        f.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
        let mut acc = SpectralField::zeros(g);
        for j in homogeneous_block_range(&g) {
            acc = acc.add(&homogeneous_block(&f, j)).unwrap();
        }
        assert!(max_coeff(&acc.sub(&f).unwrap()) < 1e-12);
        let below = *homogeneous_block_range(&g).start() - 1;
        assert!(homogeneous_block(&f, below).is_zero());
    }
}
