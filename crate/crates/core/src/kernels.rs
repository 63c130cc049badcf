//! Closed-form Biot-Savart kernels and their regularizations.
//!
//! `K_s(x) = c_s x⊥ / |x|^{4−2s}` with
//! `c_s = (1−s)Γ(1−s) / (2^{2s−1} π Γ(s))`, the cutoff `χ_ε(x) = χ(x/ε)`
//! built on [`crate::profile::bump`], and `K_{s,ε} = (1 − χ_ε) K_s`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::fit::{fit_log_log, LineFit};
use crate::profile::bump;
use crate::spectral::{homogeneous_block, homogeneous_block_range, GridSpec, SpectralField, VectorField};
use crate::{Error, Result, Vec2};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function by the Lanczos approximation (g = 7, 9 terms), with the
/// reflection formula below 1/2.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS_COEFFS[0];
        for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

/// The Biot-Savart constant `c_s` for `0 < s ≤ 1`.
///
/// Evaluated as `Γ(2−s) / (2^{2s−1} π Γ(s))`, which equals the defining
/// expression since `(1−s)Γ(1−s) = Γ(2−s)` and is continuous up to `s = 1`
/// where it gives `1/(2π)`.
pub fn c_s_constant(s: f64) -> Result<f64> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::OutOfRange {
            name: "s",
            value: s,
            expected: "0 < s ≤ 1",
        });
    }
    Ok(gamma(2.0 - s) / (2f64.powf(2.0 * s - 1.0) * PI * gamma(s)))
}

/// Kernel parameters; `c_s` is derived on demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    s: f64,
    eps: f64,
}

impl KernelParams {
    pub fn new(s: f64, eps: f64) -> Result<Self> {
        c_s_constant(s)?;
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::OutOfRange {
                name: "eps",
                value: eps,
                expected: "ε ≥ 0",
            });
        }
        Ok(Self { s, eps })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn c_s(&self) -> f64 {
        c_s_constant(self.s).expect("validated at construction")
    }

    /// Same exponent, different regularization scale.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.s, eps)
    }
}

/// Radial cutoff `χ_ε(x) = χ(x/ε)`: 1 on `|x| ≤ ε/2`, 0 on `|x| ≥ ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub scale: f64,
}

impl Cutoff {
    pub fn new(scale: f64) -> Self {
        Self { scale }
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        self.eval_radius(x.norm())
    }

    pub fn eval_radius(&self, r: f64) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        bump(r / self.scale)
    }
}

#[inline]
fn k_s_raw(x: Vec2, s: f64, c_s: f64) -> Vec2 {
    let r2 = x.norm_sq();
    x.perp() * (c_s / r2.powf(2.0 - s))
}

/// Unregularized kernel `K_s(x)`; errors at the origin.
pub fn eval_k_s(x: Vec2, s: f64) -> Result<Vec2> {
    let c_s = c_s_constant(s)?;
    if x.norm_sq() == 0.0 {
        return Err(Error::SingularKernel);
    }
    Ok(k_s_raw(x, s, c_s))
}

/// Regularized kernel `K_{s,ε}(x) = (1 − χ_ε(x)) K_s(x)`.
///
/// Takes the unregularized branch verbatim for `|x| ≥ ε`, so values there
/// are bit-identical to [`eval_k_s`]. With `ε = 0` the origin maps to zero.
pub fn eval_k_s_eps(x: Vec2, params: &KernelParams) -> Vec2 {
    let c_s = params.c_s();
    let r = x.norm();
    let eps = params.eps;
    if r == 0.0 || r <= 0.5 * eps {
        return Vec2::ZERO;
    }
    let k = k_s_raw(x, params.s, c_s);
    if r >= eps {
        k
    } else {
        k * (1.0 - Cutoff::new(eps).eval_radius(r))
    }
}

/// Gauss-Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let nf = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if order == 0 { 1.0 } else { p1 };
            dp = nf * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// Polar product rule on `B(0, r)`: Gauss-Legendre in radius, equispaced
/// angles. Nodes come in consecutive antipodal pairs `(x, −x)`.
fn polar_nodes(r: f64, order: usize) -> Vec<(Vec2, f64)> {
    let (gx, gw) = gauss_legendre(order);
    let n_ang = 4 * order;
    let mut out = Vec::with_capacity(order * n_ang);
    for (x, w) in gx.iter().zip(&gw) {
        let rho = 0.5 * r * (1.0 + x);
        let wr = 0.5 * r * w * rho * (2.0 * PI / n_ang as f64);
        for m in 0..n_ang / 2 {
            let ang = 2.0 * PI * (m as f64 + 0.5) / n_ang as f64;
            let p = Vec2::new(rho * ang.cos(), rho * ang.sin());
            out.push((p, wr));
            out.push((-p, wr));
        }
    }
    out
}

/// Integrates `K_{s,ε}` over `B(0, r)` with a point-symmetric polar rule.
///
/// Nodes are summed in antipodal pairs, so oddness of the kernel makes the
/// residual vanish to round-off.
pub fn ball_mean_zero_check(params: &KernelParams, r: f64, order: usize) -> Result<Vec2> {
    if !(r > 0.0) {
        return Err(Error::OutOfRange {
            name: "r",
            value: r,
            expected: "r > 0",
        });
    }
    let nodes = polar_nodes(r, order.max(1));
    let mut acc = Vec2::ZERO;
    for pair in nodes.chunks_exact(2) {
        let (x, w) = pair[0];
        acc += (eval_k_s_eps(x, params) + eval_k_s_eps(pair[1].0, params)) * w;
    }
    Ok(acc)
}

/// Integrates `K_{s,ε}` over the ball `B(center, r)` (not antipodally paired).
pub fn ball_integral(params: &KernelParams, center: Vec2, r: f64, order: usize) -> Vec2 {
    let mut acc = Vec2::ZERO;
    for (x, w) in polar_nodes(r, order.max(1)) {
        acc += eval_k_s_eps(center + x, params) * w;
    }
    acc
}

/// Samples `kernel(x_node − center)` on the grid, nearest periodic image.
/// The row and column at offset `−L/2` (which have no antipodal partner on
/// the lattice) are set to zero so the discrete kernel stays exactly odd.
pub fn rasterize(
    grid: &GridSpec,
    center: Vec2,
    kernel: impl Fn(Vec2) -> Vec2 + Sync,
) -> (Vec<f64>, Vec<f64>) {
    use rayon::prelude::*;
    let n = grid.n();
    let half = grid.side_length() / 2.0;
    let vals: Vec<Vec2> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let d = grid.nearest_image(grid.node(idx % n, idx / n) - center);
            if d.x == -half || d.y == -half {
                Vec2::ZERO
            } else {
                kernel(d)
            }
        })
        .collect();
    (vals.iter().map(|v| v.x).collect(), vals.iter().map(|v| v.y).collect())
}

/// Periodic FFT convolution with a rasterized kernel.
#[derive(Debug, Clone)]
pub struct KernelConvolver {
    spectrum: VectorField,
}

impl KernelConvolver {
    pub fn new(grid: &GridSpec, params: &KernelParams) -> Result<Self> {
        if params.eps == 0.0 && params.s <= 0.5 {
            return Err(Error::OutOfRange {
                name: "s",
                value: params.s,
                expected: "s > 1/2 when ε = 0",
            });
        }
        let (kx, ky) = rasterize(grid, Vec2::ZERO, |d| eval_k_s_eps(d, params));
        // coefficient of a circular convolution h² Σ K(x−y)θ(y) is L² K̂ θ̂
        let area = grid.side_length() * grid.side_length();
        let spectrum = VectorField {
            x: SpectralField::from_physical(&kx, *grid)?.scaled(area),
            y: SpectralField::from_physical(&ky, *grid)?.scaled(area),
        };
        Ok(Self { spectrum })
    }

    pub fn apply(&self, theta: &SpectralField) -> Result<VectorField> {
        theta.check_grid(&self.spectrum.x)?;
        let mul = |k: &SpectralField| -> SpectralField {
            let coeffs: Vec<Complex64> = k
                .coeffs()
                .iter()
                .zip(theta.coeffs())
                .map(|(a, b)| a * b)
                .collect();
            SpectralField::from_coefficients(*theta.grid(), coeffs).expect("same grid")
        };
        Ok(VectorField {
            x: mul(&self.spectrum.x),
            y: mul(&self.spectrum.y),
        })
    }
}

/// `K_{s,ε} ⋆ θ` by periodic FFT convolution of the rasterized kernel.
pub fn convolve_kernel(theta: &SpectralField, params: &KernelParams) -> Result<VectorField> {
    KernelConvolver::new(theta.grid(), params)?.apply(theta)
}

/// Measured `‖K_s − K_{s,ε}‖_{Ḃ^σ_{1,∞}}` along an ε-ladder.
#[derive(Debug, Clone)]
pub struct KernelRate {
    pub eps: Vec<f64>,
    pub norms: Vec<f64>,
    pub fit: LineFit,
}

/// Grid homogeneous `Ḃ^σ_{1,∞}` norm of a vector field, using `|·|` pointwise.
pub fn vector_besov_1_inf(field: &VectorField, sigma: f64) -> f64 {
    let grid = *field.grid();
    homogeneous_block_range(&grid)
        .map(|j| {
            let bx = homogeneous_block(&field.x, j).to_physical();
            let by = homogeneous_block(&field.y, j).to_physical();
            let l1: f64 = bx.iter().zip(&by).map(|(a, b)| a.hypot(*b)).sum::<f64>() * grid.cell_area();
            2f64.powf(j as f64 * sigma) * l1
        })
        .fold(0.0, f64::max)
}

/// Rasterizes `K_s − K_{s,ε} = χ_ε K_s` for each ε, measures its grid
/// `Ḃ^σ_{1,∞}` norm and fits the log-log slope against ε.
pub fn kernel_convergence_rate(
    grid: &GridSpec,
    s: f64,
    sigma: f64,
    eps_ladder: &[f64],
) -> Result<KernelRate> {
    if eps_ladder.len() < 3 {
        return Err(Error::Invalid(format!(
            "ε-ladder needs at least 3 points, got {}",
            eps_ladder.len()
        )));
    }
    let mut norms = Vec::with_capacity(eps_ladder.len());
    for &eps in eps_ladder {
        let params = KernelParams::new(s, eps)?;
        let c_s = params.c_s();
        let cut = Cutoff::new(eps);
        let (dx, dy) = rasterize(grid, Vec2::ZERO, |d| {
            if d.norm_sq() == 0.0 {
                Vec2::ZERO
            } else {
                k_s_raw(d, s, c_s) * cut.eval(d)
            }
        });
        let field = VectorField {
            x: SpectralField::from_physical(&dx, *grid)?,
            y: SpectralField::from_physical(&dy, *grid)?,
        };
        norms.push(vector_besov_1_inf(&field, sigma));
    }
    let fit = fit_log_log(eps_ladder, &norms)
        .ok_or_else(|| Error::Invalid("degenerate ε-ladder".into()))?;
    Ok(KernelRate {
        eps: eps_ladder.to_vec(),
        norms,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gamma_reference_values() {
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-14);
        let mut fact = 1.0;
        for n in 1..15 {
            assert!((gamma(n as f64) - fact).abs() <= 1e-13 * fact, "Γ({n})");
            fact *= n as f64;
        }
    }

    #[test]
    fn c_s_half_and_limit() {
        let c = c_s_constant(0.5).unwrap();
        assert!((c - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((c_s_constant(1.0).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((c_s_constant(0.999).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-3);
        for i in 1..100 {
            assert!(c_s_constant(i as f64 / 100.0).unwrap() > 0.0);
        }
        assert!(c_s_constant(0.0).is_err());
        assert!(c_s_constant(1.2).is_err());
    }

    #[test]
    fn k_s_values() {
        let s = 0.5;
        let c = c_s_constant(s).unwrap();
        assert_eq!(eval_k_s(Vec2::new(1.0, 0.0), s).unwrap(), Vec2::new(0.0, c));
        let x = Vec2::new(0.3, -0.7);
        assert_eq!(eval_k_s(-x, 0.7).unwrap(), -eval_k_s(x, 0.7).unwrap());
        let mag = eval_k_s(Vec2::new(0.0, 2.0), 0.5).unwrap().norm();
        assert!((mag - c / 4.0).abs() < 1e-16);
        assert_eq!(eval_k_s(Vec2::ZERO, s).unwrap_err(), Error::SingularKernel);
    }

    #[test]
    fn regularized_kernel_regions() {
        let p = KernelParams::new(0.7, 0.2).unwrap();
        assert_eq!(eval_k_s_eps(Vec2::new(0.05, 0.05), &p), Vec2::ZERO);
        assert_eq!(eval_k_s_eps(Vec2::new(0.1, 0.0), &p), Vec2::ZERO);
        let x = Vec2::new(0.0, 0.4);
        assert_eq!(eval_k_s_eps(x, &p), eval_k_s(x, 0.7).unwrap());
        let mid = Vec2::new(0.12, 0.05);
        let reg = eval_k_s_eps(mid, &p).norm();
        assert!(reg > 0.0 && reg < eval_k_s(mid, 0.7).unwrap().norm());
    }

    #[test]
    fn regularized_kernel_is_bounded_and_odd() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p = KernelParams::new(0.65, 0.3).unwrap();
        let c = p.c_s();
        for _ in 0..1000 {
            let x = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let k = eval_k_s_eps(x, &p);
            let bound = c / x.norm().powf(3.0 - 2.0 * p.s());
            assert!(k.norm() <= bound * (1.0 + 1e-14));
            assert_eq!(eval_k_s_eps(-x, &p), -k);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let sum: f64 = w.iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
        let m14: f64 = x.iter().zip(&w).map(|(a, b)| a.powi(14) * b).sum();
        assert!((m14 - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn ball_integrals() {
        let p = KernelParams::new(0.75, 0.2).unwrap();
        for &r in &[0.05, 0.15, 0.5, 2.0] {
            let res = ball_mean_zero_check(&p, r, 16).unwrap();
            assert!(res.norm() < 1e-14, "r = {r}: {res:?}");
        }
        assert_eq!(ball_mean_zero_check(&p, 0.05, 8).unwrap(), Vec2::ZERO);
        let shifted = ball_integral(&p, Vec2::new(0.3, 0.0), 0.5, 32);
        assert!(shifted.norm() > 1e-3, "off-center ball must not cancel: {shifted:?}");
        assert!(ball_mean_zero_check(&p, 0.0, 8).is_err());
    }

    #[test]
    fn convolution_of_zero_is_zero() {
        let g = GridSpec::new(4.0, 32).unwrap();
        let p = KernelParams::new(0.75, 0.5).unwrap();
        let v = convolve_kernel(&SpectralField::zeros(g), &p).unwrap();
        assert!(v.x.is_zero() && v.y.is_zero());
    }

    #[test]
    fn even_theta_gives_odd_velocity() {
        let g = GridSpec::new(4.0, 64).unwrap();
        let c = g.center();
        let p = KernelParams::new(0.75, 0.25).unwrap();
        let theta = SpectralField::from_fn(g, |x| {
            let d = x - c;
            (-(d.x * d.x / 0.1 + d.y * d.y / 0.3)).exp()
        });
        let v = convolve_kernel(&theta, &p).unwrap();
        let (vx, vy) = v.to_physical();
        let n = 64;
        let scale = vx.iter().chain(&vy).fold(0.0f64, |m, a| m.max(a.abs()));
        for iy in 1..n {
            for ix in 1..n {
                let (mx, my) = (n - ix, n - iy);
                assert!((vx[iy * n + ix] + vx[my * n + mx]).abs() < 1e-12 * scale);
                assert!((vy[iy * n + ix] + vy[my * n + mx]).abs() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn short_ladder_rejected() {
        let g = GridSpec::new(1.0, 32).unwrap();
        assert!(kernel_convergence_rate(&g, 0.75, 0.0, &[0.2, 0.1]).is_err());
    }

    #[test]
    fn difference_support_halves_with_eps() {
        let g = GridSpec::new(2.0, 128).unwrap();
        for &eps in &[0.4, 0.2] {
            let p = KernelParams::new(0.75, eps).unwrap();
            let (dx, dy) = rasterize(&g, Vec2::ZERO, |d| {
                if d.norm_sq() == 0.0 {
                    Vec2::ZERO
                } else {
                    eval_k_s(d, 0.75).unwrap() - eval_k_s_eps(d, &p)
                }
            });
            let mut rmax: f64 = 0.0;
            for idx in 0..g.len() {
                if dx[idx] != 0.0 || dy[idx] != 0.0 {
                    let d = g.nearest_image(g.node(idx % 128, idx / 128));
                    rmax = rmax.max(d.norm());
                }
            }
            assert!(rmax < eps && rmax > eps - 2.0 * g.spacing());
        }
    }
}
