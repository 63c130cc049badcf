use std::f64::consts::PI;

use crate::{Error, Result, Vec2};

/// Uniform discretization of the periodic square `[0, L)²`.
///
/// Wavenumber indices follow the FFT ordering: storage index `i` maps to the
/// integer wavenumber `k = i` for `i < n/2` and `k = i − n` otherwise, so
/// each axis covers `[−n/2, n/2)`. The physical wavenumber is `ξ = 2πk/L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    side_length: f64,
    resolution: usize,
    dealias_fraction: f64,
}

impl GridSpec {
    pub const DEFAULT_DEALIAS_FRACTION: f64 = 2.0 / 3.0;

    pub fn new(side_length: f64, resolution: usize) -> Result<Self> {
        Self::with_dealias(side_length, resolution, Self::DEFAULT_DEALIAS_FRACTION)
    }

    pub fn with_dealias(side_length: f64, resolution: usize, dealias_fraction: f64) -> Result<Self> {
        if !(side_length > 0.0 && side_length.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "side length must be positive, got {side_length}"
            )));
        }
        if resolution < 2 || !resolution.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "resolution must be a power of two ≥ 2, got {resolution}"
            )));
        }
        if !(dealias_fraction > 0.0 && dealias_fraction <= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "dealias fraction must lie in (0, 1], got {dealias_fraction}"
            )));
        }
        Ok(Self {
            side_length,
            resolution,
            dealias_fraction,
        })
    }

    #[inline]
    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.resolution
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.resolution * self.resolution
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dealias_fraction(&self) -> f64 {
        self.dealias_fraction
    }

    /// Grid spacing `h = L/n`.
    #[inline]
    pub fn spacing(&self) -> f64 {
        self.side_length / self.resolution as f64
    }

    /// Area element `h²` of the quadrature rule.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    /// Fundamental wavenumber `2π/L`.
    #[inline]
    pub fn fundamental(&self) -> f64 {
        2.0 * PI / self.side_length
    }

    /// Signed integer wavenumber of storage index `i`.
    #[inline]
    pub fn wavenumber_index(&self, i: usize) -> i64 {
        let n = self.resolution as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Storage index of the signed integer wavenumber `k` (taken mod n).
    #[inline]
    pub fn storage_index(&self, k: i64) -> usize {
        k.rem_euclid(self.resolution as i64) as usize
    }

    /// Physical wavenumber along one axis.
    #[inline]
    pub fn xi(&self, i: usize) -> f64 {
        self.fundamental() * self.wavenumber_index(i) as f64
    }

    /// Wavenumber used by odd (derivative-like) symbols. The Nyquist index
    /// has no conjugate partner, so its derivative symbol is set to zero.
    #[inline]
    pub fn xi_odd(&self, i: usize) -> f64 {
        if i == self.resolution / 2 {
            0.0
        } else {
            self.xi(i)
        }
    }

    /// Wavevector of the flat coefficient index `idx = iy·n + ix`.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> Vec2 {
        let n = self.resolution;
        Vec2::new(self.xi(idx % n), self.xi(idx / n))
    }

    /// Largest retained integer wavenumber per axis under the dealias rule.
    pub fn dealias_kmax(&self) -> i64 {
        (self.dealias_fraction * self.resolution as f64 / 2.0).floor() as i64
    }

    /// Whether the flat index survives the dealias truncation.
    #[inline]
    pub fn is_retained(&self, idx: usize) -> bool {
        let n = self.resolution;
        let kmax = self.dealias_kmax();
        let kx = self.wavenumber_index(idx % n);
        let ky = self.wavenumber_index(idx / n);
        kx.abs() <= kmax && ky.abs() <= kmax && kx != -(n as i64) / 2 && ky != -(n as i64) / 2
    }

    /// Largest `|ξ|` present on the lattice.
    pub fn max_wavenumber(&self) -> f64 {
        self.fundamental() * (self.resolution as f64 / 2.0) * std::f64::consts::SQRT_2
    }

    /// Coordinates of the grid node `(ix, iy)`.
    #[inline]
    pub fn node(&self, ix: usize, iy: usize) -> Vec2 {
        let h = self.spacing();
        Vec2::new(ix as f64 * h, iy as f64 * h)
    }

    /// Displacement `x − c` mapped to the nearest periodic image, each
    /// component in `[−L/2, L/2)`.
    #[inline]
    pub fn nearest_image(&self, d: Vec2) -> Vec2 {
        let l = self.side_length;
        let wrap = |v: f64| v - l * (v / l + 0.5).floor();
        Vec2::new(wrap(d.x), wrap(d.y))
    }

    /// Center of the periodic box.
    pub fn center(&self) -> Vec2 {
        Vec2::new(0.5 * self.side_length, 0.5 * self.side_length)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_resolution_and_length() {
        assert!(GridSpec::new(1.0, 0).is_err());
        assert!(GridSpec::new(1.0, 48).is_err());
        assert!(GridSpec::new(0.0, 64).is_err());
        assert!(GridSpec::new(-2.0, 64).is_err());
        assert!(GridSpec::new(1.0, 64).is_ok());
    }

    #[test]
    fn lattice_is_closed_under_negation() {
        let g = GridSpec::new(3.0, 16).unwrap();
        for i in 1..16 {
            if i == 8 {
                continue;
            }
            let k = g.wavenumber_index(i);
            assert_eq!(g.wavenumber_index(g.storage_index(-k)), -k);
            assert_eq!(g.xi(g.storage_index(-k)), -g.xi(i));
        }
        assert_eq!(g.wavenumber_index(8), -8);
    }

    #[test]
    fn dealias_cutoff_two_thirds() {
        let g = GridSpec::new(1.0, 256).unwrap();
        assert_eq!(g.dealias_kmax(), 85);
        assert!(3 * g.dealias_kmax() < 256);
    }

    #[test]
    fn nearest_image_wraps() {
        let g = GridSpec::new(4.0, 16).unwrap();
        let d = g.nearest_image(Vec2::new(3.5, -2.5));
        assert!((d.x + 0.5).abs() < 1e-15);
        assert!((d.y - 1.5).abs() < 1e-15);
    }
}
