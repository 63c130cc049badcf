use num_complex::Complex64;

use super::{GridSpec, SpectralField, VectorField};
use crate::{Error, Result};

/// Applies the symbol `|ξ|^{2·power}`, i.e. `(−Δ)^{power}`.
///
/// The zero mode is left untouched for `power = 0` and mapped to zero
/// otherwise (for negative powers this is the mean-zero convention).
pub fn fractional_laplacian(f: &SpectralField, power: f64) -> SpectralField {
    if power == 0.0 {
        return f.clone();
    }
    let mut out = f.apply_real_symbol(|xi| {
        let k2 = xi.norm_sq();
        if k2 == 0.0 {
            0.0
        } else {
            k2.powf(power)
        }
    });
    out.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
    out
}

/// `−∇⊥ψ = (∂_y ψ, −∂_x ψ)` with `∇⊥ = (−∂_y, ∂_x)`.
pub fn minus_perp_gradient(psi: &SpectralField) -> VectorField {
    VectorField {
        x: psi.derivative(1),
        y: psi.derivative(0).scaled(-1.0),
    }
}

/// The gSQG velocity `v = −∇⊥(−Δ)^{−s}θ = K_s ⋆ θ`.
///
/// Mode by mode, `v̂(ξ) = −iξ⊥|ξ|^{−2s}θ̂(ξ)` with `ξ⊥ = (−ξ₂, ξ₁)`; the zero
/// mode of `v` vanishes and `ξ·v̂(ξ) = 0` exactly.
pub fn biot_savart(theta: &SpectralField, s: f64) -> Result<VectorField> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::OutOfRange {
            name: "s",
            value: s,
            expected: "0 < s < 1",
        });
    }
    Ok(minus_perp_gradient(&fractional_laplacian(theta, -s)))
}

/// Sharp Fourier truncation `E_N`: keeps modes with `|ξ| ≤ N`.
pub fn spectral_cutoff(f: &SpectralField, cutoff: f64) -> Result<SpectralField> {
    if !(cutoff > 0.0) {
        return Err(Error::OutOfRange {
            name: "N",
            value: cutoff,
            expected: "N > 0",
        });
    }
    let grid: GridSpec = *f.grid();
    let mut out = f.clone();
    for (idx, c) in out.coeffs_mut().iter_mut().enumerate() {
        if grid.wavevector(idx).norm() > cutoff {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(grid: GridSpec, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        SpectralField::from_physical(&values, grid).unwrap().dealiased()
    }

    #[test]
    fn power_zero_is_identity() {
        let g = GridSpec::new(2.0, 16).unwrap();
        let f = random_field(g, 3);
        assert_eq!(fractional_laplacian(&f, 0.0), f);
    }

    #[test]
    fn single_mode_power_one() {
        let g = GridSpec::new(3.0, 16).unwrap();
        let mut f = SpectralField::zeros(g);
        f.coeffs_mut()[1] = Complex64::new(0.5, 0.25);
        let out = fractional_laplacian(&f, 1.0);
        let k = 2.0 * PI / 3.0;
        let expected = Complex64::new(0.5, 0.25) * (k * k);
        assert!((out.coeffs()[1] - expected).norm() < 1e-14);
    }

    #[test]
    fn inverse_pair_on_zero_mean_field() {
        let g = GridSpec::new(2.0, 32).unwrap();
        let mut f = random_field(g, 5);
        f.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
        let back = fractional_laplacian(&fractional_laplacian(&f, -0.6), 0.6);
        let scale = f.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
        let err = back
            .coeffs()
            .iter()
            .zip(f.coeffs())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12 * scale.max(1.0));
    }

    #[test]
    fn constant_theta_has_no_velocity() {
        let g = GridSpec::new(2.0, 16).unwrap();
        let theta = SpectralField::from_fn(g, |_| 3.0);
        let v = biot_savart(&theta, 0.5).unwrap();
        assert!(v.x.is_zero() && v.y.is_zero());
    }

    #[test]
    fn plane_wave_velocity() {
        // θ = cos(ξ₀·x), ξ₀ = (2π/L, 0): v = −∇⊥(−Δ)^{−s}θ = (0, |ξ₀|^{1−2s} sin(ξ₀·x)).
        let l = 5.0;
        let s = 0.7;
        let g = GridSpec::new(l, 32).unwrap();
        let k0 = 2.0 * PI / l;
        let theta = SpectralField::from_fn(g, |p| (k0 * p.x).cos());
        let v = biot_savart(&theta, s).unwrap();
        let (vx, vy) = v.to_physical();
        let amp = k0.powf(1.0 - 2.0 * s);
        for iy in 0..32 {
            for ix in 0..32 {
                let p = g.node(ix, iy);
                assert!(vx[iy * 32 + ix].abs() < 1e-13);
                assert!((vy[iy * 32 + ix] - amp * (k0 * p.x).sin()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn radial_theta_gives_azimuthal_velocity() {
        let l = 16.0;
        let g = GridSpec::new(l, 128).unwrap();
        let c = Vec2::new(8.0, 8.0);
        let theta = SpectralField::from_fn(g, |p| (-(p - c).norm_sq() / 0.5).exp());
        let v = biot_savart(&theta, 0.6).unwrap();
        assert!(v.eval_at(c).norm() < 1e-12);
        for k in 0..16 {
            let ang = 2.0 * PI * k as f64 / 16.0 + 0.1;
            let p = c + Vec2::new(ang.cos(), ang.sin()) * 0.8;
            let vel = v.eval_at(p);
            let radial = vel.dot(p - c) / 0.8;
            // periodic images break full rotational symmetry; the residual
            // decays like L^-5 (≈1e-4 at L = 8, ≈4e-6 at L = 16)
            assert!(radial.abs() < 1e-5 * vel.norm(), "radial part {radial}");
        }
    }

    #[test]
    fn velocity_is_mode_exactly_divergence_free() {
        let g = GridSpec::new(2.0, 32).unwrap();
        let theta = random_field(g, 11);
        for &s in &[0.2, 0.5, 0.9] {
            let v = biot_savart(&theta, s).unwrap();
            let div = v.divergence();
            let vmax = v.x.coeffs().iter().chain(v.y.coeffs()).map(|c| c.norm()).fold(0.0, f64::max);
            let worst = div.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
            assert!(worst <= 1e-14 * vmax * g.max_wavenumber());
        }
    }

    #[test]
    fn biot_savart_rejects_bad_exponent() {
        let g = GridSpec::new(1.0, 8).unwrap();
        let f = SpectralField::zeros(g);
        assert!(biot_savart(&f, 0.0).is_err());
        assert!(biot_savart(&f, 1.0).is_err());
    }

    #[test]
    fn cutoff_projection() {
        let g = GridSpec::new(2.0 * PI, 32).unwrap();
        let f = random_field(g, 2);
        let e = spectral_cutoff(&f, 6.0).unwrap();
        assert_eq!(spectral_cutoff(&e, 6.0).unwrap(), e);
        let small = spectral_cutoff(&f, 3.0).unwrap();
        assert_eq!(spectral_cutoff(&small, 6.0).unwrap(), small);
        // single mode at |ξ| = 5 with N = 4.5
        let mut m = SpectralField::zeros(g);
        m.coeffs_mut()[5] = Complex64::new(1.0, 0.0);
        assert!(spectral_cutoff(&m, 4.5).unwrap().is_zero());
        assert!(spectral_cutoff(&m, -1.0).is_err());
    }
}
