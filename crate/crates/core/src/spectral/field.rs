use num_complex::Complex64;
use rayon::prelude::*;

use super::fft::Fft2;
use super::GridSpec;
use crate::{Error, Result, Vec2};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// A real scalar field on a [`GridSpec`], stored as Fourier coefficients.
///
/// With `f(x) = Σ_ξ c_ξ e^{iξ·x}`, the coefficients are
/// `c_ξ = n⁻² Σ_x f(x) e^{−iξ·x}`; the zero mode is the spatial mean.
/// Coefficients are laid out row-major: flat index `iy·n + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            coeffs: vec![ZERO; grid.len()],
        }
    }

    pub fn from_coefficients(grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: coeffs.len(),
            });
        }
        Ok(Self { grid, coeffs })
    }

    /// Transforms physical-space samples (row-major, `values[iy·n + ix]`).
    pub fn from_physical(values: &[f64], grid: GridSpec) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Fft2::get(grid.n()).forward(&mut data);
        let norm = 1.0 / grid.len() as f64;
        data.iter_mut().for_each(|c| *c *= norm);
        Ok(Self { grid, coeffs: data })
    }

    /// Samples `f(x, y)` on the grid nodes and transforms.
    pub fn from_fn(grid: GridSpec, f: impl Fn(Vec2) -> f64 + Sync) -> Self {
        let values = sample_nodes(grid, f);
        Self::from_physical(&values, grid).expect("sampled array matches grid")
    }

    /// Physical-space values at the grid nodes.
    pub fn to_physical(&self) -> Vec<f64> {
        let mut data = self.coeffs.clone();
        Fft2::get(self.grid.n()).inverse(&mut data);
        data.into_iter().map(|c| c.re).collect()
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Spatial mean (the zero-mode coefficient).
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    /// Multiplies each coefficient by `symbol(ξ)`.
    pub fn apply_symbol(&self, symbol: impl Fn(Vec2) -> Complex64 + Sync) -> Self {
        let grid = self.grid;
        let coeffs = self
            .coeffs
            .par_iter()
            .enumerate()
            .map(|(idx, &c)| if c == ZERO { ZERO } else { c * symbol(grid.wavevector(idx)) })
            .collect();
        Self { grid, coeffs }
    }

    /// Multiplies each coefficient by a real radial-or-not weight.
    pub fn apply_real_symbol(&self, symbol: impl Fn(Vec2) -> f64 + Sync) -> Self {
        let grid = self.grid;
        let coeffs = self
            .coeffs
            .par_iter()
            .enumerate()
            .map(|(idx, &c)| if c == ZERO { ZERO } else { c * symbol(grid.wavevector(idx)) })
            .collect();
        Self { grid, coeffs }
    }

    /// Spectral partial derivative along `x` (`axis = 0`) or `y` (`axis = 1`).
    pub fn derivative(&self, axis: usize) -> Self {
        let grid = self.grid;
        let n = grid.n();
        let coeffs = self
            .coeffs
            .par_iter()
            .enumerate()
            .map(|(idx, &c)| {
                let k = if axis == 0 { grid.xi_odd(idx % n) } else { grid.xi_odd(idx / n) };
                c * Complex64::new(0.0, k)
            })
            .collect();
        Self { grid, coeffs }
    }

    pub fn gradient(&self) -> VectorField {
        VectorField {
            x: self.derivative(0),
            y: self.derivative(1),
        }
    }

    /// Zeroes every mode outside the dealias window.
    pub fn dealias(&mut self) {
        let grid = self.grid;
        self.coeffs.par_iter_mut().enumerate().for_each(|(idx, c)| {
            if !grid.is_retained(idx) {
                *c = ZERO;
            }
        });
    }

    pub fn dealiased(mut self) -> Self {
        self.dealias();
        self
    }

    pub fn is_dealiased(&self) -> bool {
        self.coeffs
            .iter()
            .enumerate()
            .all(|(idx, c)| self.grid.is_retained(idx) || *c == ZERO)
    }

    /// Largest `|c_{−ξ} − conj(c_ξ)|` over the lattice (Nyquist rows skipped).
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n();
        let mut worst: f64 = 0.0;
        for iy in 0..n {
            for ix in 0..n {
                if ix == n / 2 || iy == n / 2 {
                    continue;
                }
                let mx = (n - ix) % n;
                let my = (n - iy) % n;
                let d = self.coeffs[my * n + mx] - self.coeffs[iy * n + ix].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// `self + factor · other`.
    pub fn add_scaled(&self, other: &SpectralField, factor: f64) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Self {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b * factor)
                .collect(),
        })
    }

    pub fn add(&self, other: &SpectralField) -> Result<Self> {
        self.add_scaled(other, 1.0)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<Self> {
        self.add_scaled(other, -1.0)
    }

    pub(crate) fn check_grid(&self, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Exact trigonometric interpolation: `Σ_ξ c_ξ e^{iξ·x}` at an arbitrary point.
    pub fn eval_at(&self, point: Vec2) -> f64 {
        PointEvaluator::new(&self.grid, point).eval(self)
    }

    /// Values on the `factor·n` grid obtained by zero-padding the spectrum.
    /// This is the exact trigonometric interpolant sampled at spacing `h/factor`.
    pub fn upsample(&self, factor: usize) -> Vec<f64> {
        assert!(factor >= 1 && factor.is_power_of_two());
        let n = self.grid.n();
        let m = n * factor;
        let mut data = vec![ZERO; m * m];
        for iy in 0..n {
            let ky = self.grid.wavenumber_index(iy);
            let ty = ky.rem_euclid(m as i64) as usize;
            for ix in 0..n {
                let kx = self.grid.wavenumber_index(ix);
                let tx = kx.rem_euclid(m as i64) as usize;
                data[ty * m + tx] = self.coeffs[iy * n + ix];
            }
        }
        Fft2::get(m).inverse(&mut data);
        data.into_iter().map(|c| c.re).collect()
    }
}

/// Precomputed phase factors for evaluating many fields at one point.
pub struct PointEvaluator {
    n: usize,
    phase_x: Vec<Complex64>,
    phase_y: Vec<Complex64>,
}

impl PointEvaluator {
    pub fn new(grid: &GridSpec, point: Vec2) -> Self {
        let n = grid.n();
        let phase = |coord: f64| -> Vec<Complex64> {
            (0..n)
                .map(|i| {
                    let arg = grid.xi(i) * coord;
                    Complex64::new(arg.cos(), arg.sin())
                })
                .collect()
        };
        Self {
            n,
            phase_x: phase(point.x),
            phase_y: phase(point.y),
        }
    }

    pub fn eval(&self, field: &SpectralField) -> f64 {
        let n = self.n;
        debug_assert_eq!(field.grid().n(), n);
        let c = field.coeffs();
        let mut total = ZERO;
        for iy in 0..n {
            let row = &c[iy * n..(iy + 1) * n];
            let mut acc = ZERO;
            for (coef, ph) in row.iter().zip(&self.phase_x) {
                acc += coef * ph;
            }
            total += acc * self.phase_y[iy];
        }
        total.re
    }
}

/// A planar vector field given by two spectral components.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub x: SpectralField,
    pub y: SpectralField,
}

impl VectorField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            x: SpectralField::zeros(grid),
            y: SpectralField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.x.grid()
    }

    pub fn divergence(&self) -> SpectralField {
        let dx = self.x.derivative(0);
        let dy = self.y.derivative(1);
        dx.add(&dy).expect("components share a grid")
    }

    pub fn eval_at(&self, point: Vec2) -> Vec2 {
        let ev = PointEvaluator::new(self.grid(), point);
        Vec2::new(ev.eval(&self.x), ev.eval(&self.y))
    }

    /// Evaluates at many points in parallel; output order matches input.
    pub fn eval_many(&self, points: &[Vec2]) -> Vec<Vec2> {
        points.par_iter().map(|&p| self.eval_at(p)).collect()
    }

    pub fn to_physical(&self) -> (Vec<f64>, Vec<f64>) {
        rayon::join(|| self.x.to_physical(), || self.y.to_physical())
    }

    pub fn add(&self, other: &VectorField) -> Result<Self> {
        Ok(Self {
            x: self.x.add(&other.x)?,
            y: self.y.add(&other.y)?,
        })
    }

    pub fn sub(&self, other: &VectorField) -> Result<Self> {
        Ok(Self {
            x: self.x.sub(&other.x)?,
            y: self.y.sub(&other.y)?,
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            x: self.x.scaled(factor),
            y: self.y.scaled(factor),
        }
    }

    pub fn dealias(&mut self) {
        self.x.dealias();
        self.y.dealias();
    }

    /// Grid maximum of `|v|`.
    pub fn max_magnitude(&self) -> f64 {
        let (vx, vy) = self.to_physical();
        vx.iter()
            .zip(&vy)
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
    }

    /// Grid maximum of the operator 2-norm of the Jacobian `∇v`.
    pub fn max_gradient_norm(&self) -> f64 {
        let (a, c) = self.x.gradient().to_physical();
        let (b, d) = self.y.gradient().to_physical();
        // Jacobian [[a, c], [b, d]] = [[∂x vx, ∂y vx], [∂x vy, ∂y vy]]
        (0..a.len())
            .map(|i| matrix_two_norm(a[i], c[i], b[i], d[i]))
            .fold(0.0, f64::max)
    }

    /// Leray projection onto the divergence-free part, mode by mode.
    pub fn leray_project(&self) -> Self {
        let grid = *self.grid();
        let n = grid.n();
        let mut x = self.x.clone();
        let mut y = self.y.clone();
        for idx in 0..grid.len() {
            let kx = grid.xi_odd(idx % n);
            let ky = grid.xi_odd(idx / n);
            let k2 = kx * kx + ky * ky;
            if k2 == 0.0 {
                continue;
            }
            let (u, v) = (x.coeffs[idx], y.coeffs[idx]);
            let dot = (u * kx + v * ky) / k2;
            x.coeffs[idx] = u - dot * kx;
            y.coeffs[idx] = v - dot * ky;
        }
        Self { x, y }
    }
}

fn matrix_two_norm(a: f64, b: f64, c: f64, d: f64) -> f64 {
    // Largest singular value of [[a, b], [c, d]].
    let s1 = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    let disc = (s1 * s1 - 4.0 * det * det).max(0.0).sqrt();
    (0.5 * (s1 + disc)).sqrt()
}

/// Samples `f` at every grid node, row-major.
pub fn sample_nodes(grid: GridSpec, f: impl Fn(Vec2) -> f64 + Sync) -> Vec<f64> {
    let n = grid.n();
    (0..grid.len())
        .into_par_iter()
        .map(|idx| f(grid.node(idx % n, idx / n)))
        .collect()
}
