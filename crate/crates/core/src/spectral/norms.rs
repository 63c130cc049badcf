use super::littlewood_paley::{
    homogeneous_block, homogeneous_block_range, inhomogeneous_block, top_block_index,
};
use super::{GridSpec, SpectralField};
use crate::{Error, Result};

/// `L^p` norm of grid samples by the rectangle rule, `(h² Σ|f|^p)^{1/p}`;
/// `p = ∞` gives the grid maximum.
pub fn lp_norm_values(values: &[f64], grid: &GridSpec, p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let sum: f64 = if p == 1.0 {
        values.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        values.iter().map(|v| v * v).sum()
    } else {
        values.iter().map(|v| v.abs().powf(p)).sum()
    };
    (sum * grid.cell_area()).powf(1.0 / p)
}

pub fn lp_norm(f: &SpectralField, p: f64) -> f64 {
    lp_norm_values(&f.to_physical(), f.grid(), p)
}

fn weighted_parseval(f: &SpectralField, weight: impl Fn(f64) -> f64) -> f64 {
    let grid = f.grid();
    let sum: f64 = f
        .coeffs()
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let n2 = c.norm_sqr();
            if n2 == 0.0 {
                0.0
            } else {
                weight(grid.wavevector(idx).norm_sq()) * n2
            }
        })
        .sum();
    grid.side_length() * sum.sqrt()
}

/// Inhomogeneous Sobolev norm `‖f‖_{H^k} = L (Σ (1+|ξ|²)^k |c_ξ|²)^{1/2}`.
/// At `k = 0` this equals the grid `L²` norm.
pub fn sobolev_norm(f: &SpectralField, k: f64) -> f64 {
    if k == 0.0 {
        return weighted_parseval(f, |_| 1.0);
    }
    weighted_parseval(f, |k2| (1.0 + k2).powf(k))
}

/// Homogeneous Sobolev norm with weight `|ξ|^{2k}`.
///
/// For `k < 0` the field must have zero mean.
pub fn homogeneous_sobolev_norm(f: &SpectralField, k: f64) -> Result<f64> {
    if k == 0.0 {
        return Ok(weighted_parseval(f, |_| 1.0));
    }
    if k < 0.0 {
        let scale = sobolev_norm(f, 0.0) / f.grid().side_length();
        let mean = f.mean();
        if mean.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NonzeroMean { mean });
        }
    }
    Ok(weighted_parseval(f, |k2| if k2 == 0.0 { 0.0 } else { k2.powf(k) }))
}

fn check_exponent(name: &'static str, v: f64) -> Result<()> {
    if !(v >= 1.0) {
        return Err(Error::OutOfRange {
            name,
            value: v,
            expected: "1 ≤ value ≤ ∞",
        });
    }
    Ok(())
}

fn lq_sum(terms: impl Iterator<Item = f64>, q: f64) -> f64 {
    if q.is_infinite() {
        terms.fold(0.0, f64::max)
    } else {
        terms.map(|t| t.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// Inhomogeneous Besov norm
/// `‖Δ_{−1}f‖_{L^p} + (Σ_{j≥0} 2^{jqs}‖Δ_j f‖^q_{L^p})^{1/q}`.
pub fn besov_norm(f: &SpectralField, s: f64, p: f64, q: f64) -> Result<f64> {
    check_exponent("p", p)?;
    check_exponent("q", q)?;
    let top = top_block_index(f.grid());
    let low = lp_norm(&inhomogeneous_block(f, -1), p);
    let terms: Vec<f64> = (0..=top)
        .map(|j| 2f64.powf(j as f64 * s) * lp_norm(&inhomogeneous_block(f, j), p))
        .collect();
    Ok(low + lq_sum(terms.into_iter(), q))
}

/// Homogeneous Besov norm `(Σ_j 2^{jqs}‖Δ̇_j f‖^q_{L^p})^{1/q}`, with `j`
/// running over [`homogeneous_block_range`]; the zero mode is ignored.
pub fn homogeneous_besov_norm(f: &SpectralField, s: f64, p: f64, q: f64) -> Result<f64> {
    check_exponent("p", p)?;
    check_exponent("q", q)?;
    let terms: Vec<f64> = homogeneous_block_range(f.grid())
        .map(|j| 2f64.powf(j as f64 * s) * lp_norm(&homogeneous_block(f, j), p))
        .collect();
    Ok(lq_sum(terms.into_iter(), q))
}

/// Outcome of a Bernstein-ratio evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BernsteinReport {
    Ratio(f64),
    EmptyBlock,
}

/// `‖Δ_j f‖_{L^q} / (2^{2j(1/p − 1/q)} ‖Δ_j f‖_{L^p})` for `q ≥ p ≥ 1`.
pub fn bernstein_check(f: &SpectralField, j: i32, p: f64, q: f64) -> Result<BernsteinReport> {
    check_exponent("p", p)?;
    if !(q >= p) {
        return Err(Error::OutOfRange {
            name: "q",
            value: q,
            expected: "q ≥ p",
        });
    }
    let block = inhomogeneous_block(f, j.max(-1));
    if block.is_zero() {
        return Ok(BernsteinReport::EmptyBlock);
    }
    let values = block.to_physical();
    let np = lp_norm_values(&values, f.grid(), p);
    if np == 0.0 {
        return Ok(BernsteinReport::EmptyBlock);
    }
    if p == q {
        return Ok(BernsteinReport::Ratio(1.0));
    }
    let nq = lp_norm_values(&values, f.grid(), q);
    let inv_q = if q.is_infinite() { 0.0 } else { 1.0 / q };
    let factor = 2f64.powf(2.0 * j as f64 * (1.0 / p - inv_q));
    Ok(BernsteinReport::Ratio(nq / (factor * np)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec2;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn band_limited(grid: GridSpec, seed: u64, kmax: i64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = grid.n();
        let mut f = SpectralField::zeros(grid);
        for iy in 0..n {
            for ix in 0..n {
                let kx = grid.wavenumber_index(ix);
                let ky = grid.wavenumber_index(iy);
                if kx.abs() > kmax || ky.abs() > kmax || (kx, ky) == (0, 0) {
                    continue;
                }
                // fill half-plane and mirror
                if ky > 0 || (ky == 0 && kx > 0) {
                    let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    f.coeffs_mut()[iy * n + ix] = c;
                    let j = grid.storage_index(-ky) * n + grid.storage_index(-kx);
                    f.coeffs_mut()[j] = c.conj();
                }
            }
        }
        f
    }

    #[test]
    fn zero_field_norms_vanish() {
        let g = GridSpec::new(1.0, 16).unwrap();
        let z = SpectralField::zeros(g);
        assert_eq!(sobolev_norm(&z, 2.0), 0.0);
        assert_eq!(besov_norm(&z, 0.5, 2.0, 2.0).unwrap(), 0.0);
        assert_eq!(homogeneous_besov_norm(&z, 0.5, 1.0, f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn cosine_l2_norm_closed_form() {
        let (a, l) = (1.7, 3.0);
        let g = GridSpec::new(l, 32).unwrap();
        let f = SpectralField::from_fn(g, |p| a * (2.0 * PI * p.x / l).cos());
        let expected = a * l / 2f64.sqrt();
        assert!((sobolev_norm(&f, 0.0) - expected).abs() < 1e-12 * expected);
        // independent quadrature of ∫∫ a² cos² over the box
        let quad = lp_norm(&f, 2.0);
        assert!((quad - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn parseval_matches_quadrature() {
        let g = GridSpec::new(2.5, 64).unwrap();
        let f = band_limited(g, 3, 20);
        let a = sobolev_norm(&f, 0.0);
        let b = lp_norm(&f, 2.0);
        assert!(((a * a - b * b) / (b * b)).abs() < 1e-10);
    }

    #[test]
    fn sobolev_monotone_in_order() {
        let g = GridSpec::new(0.5, 32).unwrap();
        let f = band_limited(g, 4, 10);
        let mut prev = 0.0;
        for k in [-1.0, 0.0, 0.5, 1.0, 2.0, 4.0] {
            let v = sobolev_norm(&f, k);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn negative_homogeneous_requires_zero_mean() {
        let g = GridSpec::new(1.0, 16).unwrap();
        let f = SpectralField::from_fn(g, |p| 1.0 + (2.0 * PI * p.y).sin());
        assert!(matches!(homogeneous_sobolev_norm(&f, -0.5), Err(Error::NonzeroMean { .. })));
        assert!(homogeneous_sobolev_norm(&f, 0.5).is_ok());
    }

    #[test]
    fn besov_b0_22_close_to_l2() {
        let g = GridSpec::new(2.0 * PI, 64).unwrap();
        let f = band_limited(g, 21, 20);
        let b = besov_norm(&f, 0.0, 2.0, 2.0).unwrap();
        let l2 = sobolev_norm(&f, 0.0);
        // Independent route: per-block Parseval sums with the same profile.
        let fund = g.fundamental();
        let block_sq = |j: i32| -> f64 {
            let weight = |r: f64| {
                if j == -1 {
                    crate::spectral::lp_profile(r)
                } else {
                    let t = r / 2f64.powi(j);
                    crate::spectral::lp_profile(t / 2.0) - crate::spectral::lp_profile(t)
                }
            };
            let sum: f64 = f
                .coeffs()
                .iter()
                .enumerate()
                .map(|(idx, c)| weight(g.wavevector(idx).norm()).powi(2) * c.norm_sqr())
                .sum();
            g.side_length() * g.side_length() * sum
        };
        let top = crate::spectral::top_block_index(&g);
        let oracle = block_sq(-1).sqrt() + (0..=top).map(block_sq).sum::<f64>().sqrt();
        assert!(fund > 0.0);
        assert!((b - oracle).abs() < 1e-10 * oracle);
        // Adjacent blocks overlap, so Σψ_j² < 1 on the transition shells and
        // the ratio sits a little below one (≈ 0.91 for the pinned profile).
        let ratio = b / l2;
        assert!(ratio > 0.85 && ratio < 1.05, "ratio {ratio}");
    }

    #[test]
    fn besov_rejects_bad_exponents() {
        let g = GridSpec::new(1.0, 8).unwrap();
        let f = SpectralField::zeros(g);
        assert!(besov_norm(&f, 0.0, 0.5, 1.0).is_err());
        assert!(besov_norm(&f, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn bernstein_edge_cases() {
        let g = GridSpec::new(2.0 * PI, 32).unwrap();
        let f = band_limited(g, 1, 12);
        assert_eq!(bernstein_check(&f, 2, 2.0, 2.0).unwrap(), BernsteinReport::Ratio(1.0));
        assert_eq!(
            bernstein_check(&SpectralField::zeros(g), 2, 1.0, 2.0).unwrap(),
            BernsteinReport::EmptyBlock
        );
        assert!(bernstein_check(&f, 2, 2.0, 1.0).is_err());
    }

    #[test]
    fn single_mode_besov_two_block_bound() {
        // |ξ| = 2^3 on L = 2π; only blocks 2, 3 can see it.
        let g = GridSpec::new(2.0 * PI, 64).unwrap();
        let f = SpectralField::from_fn(g, |p: Vec2| (8.0 * p.x).cos());
        let s = 0.7;
        let mode = lp_norm(&f, 2.0);
        let b = besov_norm(&f, s, 2.0, 2.0).unwrap();
        let scale = 2f64.powf(3.0 * s) * mode;
        assert!(b >= 0.5 * scale && b <= 2.0 * scale, "{b} vs {scale}");
    }
}
