//! Analytical monitors: plateau radius, blow-up functional, energy,
//! radius lower bounds, stability gap, commutator identity and the
//! collapse velocity bound.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::coupled::{CoupledState, SimConfig, VortexWaveSolver};
use crate::fit::{fit_line, LineFit};
use crate::kernels::{c_s_constant, KernelConvolver, KernelParams};
use crate::pointvortex::{hamiltonian, min_distance, moment_of_inertia, VortexEnsemble};
use crate::spectral::{
    biot_savart, fractional_laplacian, lp_norm_values, sobolev_norm, GridSpec, SpectralField, VectorField,
};
use crate::{Error, Result, Vec2};

/// Lebesgue exponents reported in every record.
pub const LP_EXPONENTS: [f64; 4] = [1.0, 2.0, 4.0, f64::INFINITY];
/// Integer Sobolev orders reported in every record (plus `3 − 2s`).
pub const SOBOLEV_ORDERS: [f64; 4] = [1.0, 2.0, 3.0, 4.0];
/// Default number of circle samples for `𝒩`.
pub const DEFAULT_CIRCLE_SAMPLES: usize = 256;

/// One diagnostic sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// Zero mode of θ (its spatial mean).
    pub mean: f64,
    /// `‖θ‖_{L^p}` for `p` in [`LP_EXPONENTS`].
    pub lp_norms: [f64; 4],
    /// `‖θ‖_{H^k}` for `k` in [`SOBOLEV_ORDERS`].
    pub sobolev_norms: [f64; 4],
    /// `‖θ‖_{H^{3−2s}}`.
    pub sobolev_critical: f64,
    /// `∫₀ᵗ ‖θ‖_{H^{3−2s}}` by the trapezoidal rule over the samples.
    pub critical_integral: f64,
    /// Per vortex: `‖∇w_i‖_∞`, `w_i` the velocity seen by the plateau of `i`.
    pub grad_velocity: Vec<f64>,
    /// Per vortex plateau radius from `|θ − β_i| ≤ tol`.
    pub plateau_radius: Vec<f64>,
    /// Per vortex plateau radius from `|∇θ| ≤ tol / h`.
    pub plateau_radius_grad: Vec<f64>,
    /// Per vortex `𝒩`; NaN when the radius is outside `(0, e)`.
    pub blowup: Vec<f64>,
    /// Per vortex `|v(z_i)|` of the smooth velocity.
    pub vortex_speed: Vec<f64>,
    pub positions: Vec<Vec2>,
    /// `‖θ‖²_{H^k} + 1/min_i R_i`.
    pub energy: f64,
    pub hamiltonian: f64,
    pub moment: f64,
    pub min_distance: f64,
    pub stability_gap: Option<f64>,
}

/// Shortest round-trip representation; `inf`, `-inf` and `nan` spelled out.
pub fn format_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

impl DiagnosticsRecord {
    pub fn vortex_count(&self) -> usize {
        self.positions.len()
    }

    /// Column names with units, in output order, for `n_vortices` vortices.
    pub fn csv_header(n_vortices: usize) -> Vec<String> {
        let mut cols: Vec<String> = [
            "t [time]",
            "mean [theta]",
            "L1 [theta*length^2]",
            "L2 [theta*length]",
            "L4 [theta*length^0.5]",
            "Linf [theta]",
            "H1 [theta*length]",
            "H2 [theta*length]",
            "H3 [theta*length]",
            "H4 [theta*length]",
            "H3m2s [theta*length]",
            "int_H3m2s [theta*length*time]",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for i in 1..=n_vortices {
            cols.push(format!("z{i}x [length]"));
            cols.push(format!("z{i}y [length]"));
            cols.push(format!("R{i} [length]"));
            cols.push(format!("Rgrad{i} [length]"));
            cols.push(format!("N{i} [1/time]"));
            cols.push(format!("gradv{i} [1/time]"));
            cols.push(format!("vz{i} [length/time]"));
        }
        cols.extend(
            [
                "E [1/length]",
                "H_vortex [intensity^2*length^(2s-2)]",
                "I_vortex [intensity*length^2]",
                "min_dist [length]",
                "stability_gap [theta*length]",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        cols
    }

    /// Row values in the order of [`Self::csv_header`]. A missing stability
    /// gap is written as an empty field.
    pub fn csv_row(&self) -> Vec<String> {
        let mut row = vec![self.t, self.mean];
        row.extend_from_slice(&self.lp_norms);
        row.extend_from_slice(&self.sobolev_norms);
        row.push(self.sobolev_critical);
        row.push(self.critical_integral);
        for i in 0..self.vortex_count() {
            row.extend_from_slice(&[
                self.positions[i].x,
                self.positions[i].y,
                self.plateau_radius[i],
                self.plateau_radius_grad[i],
                self.blowup[i],
                self.grad_velocity[i],
                self.vortex_speed[i],
            ]);
        }
        row.extend_from_slice(&[self.energy, self.hamiltonian, self.moment, self.min_distance]);
        let mut out: Vec<String> = row.into_iter().map(format_f64).collect();
        out.push(self.stability_gap.map(format_f64).unwrap_or_default());
        out
    }
}

/// Serializes a record stream as CSV (header plus one row per record).
pub fn write_csv(records: &[DiagnosticsRecord]) -> Result<String> {
    let n = records.first().map_or(0, |r| r.vortex_count());
    if records.iter().any(|r| r.vortex_count() != n) {
        return Err(Error::Invalid("records disagree on the vortex count".into()));
    }
    let mut out = DiagnosticsRecord::csv_header(n).join(",");
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{}", r.csv_row().join(","));
    }
    Ok(out)
}

/// Values of θ on the grid refined by 2 (spacing `h/2`).
pub struct RefinedSamples {
    grid: GridSpec,
    values: Vec<f64>,
}

impl RefinedSamples {
    pub fn new(theta: &SpectralField) -> Self {
        Self {
            grid: *theta.grid(),
            values: theta.upsample(2),
        }
    }

    fn from_values(grid: GridSpec, values: Vec<f64>) -> Self {
        Self { grid, values }
    }

    /// Refined nodes within `cap` of `z` flagged by `bad`, as
    /// `(distance, node)` sorted by distance.
    fn bad_nodes(&self, z: Vec2, cap: f64, bad: impl Fn(f64) -> bool + Sync) -> Vec<(f64, Vec2)> {
        let m = 2 * self.grid.n();
        let hf = 0.5 * self.grid.spacing();
        let mut found: Vec<(f64, Vec2)> = (0..m)
            .into_par_iter()
            .flat_map_iter(|iy| {
                let bad = &bad;
                (0..m).filter_map(move |ix| {
                    let p = Vec2::new(ix as f64 * hf, iy as f64 * hf);
                    let d = self.grid.nearest_image(p - z);
                    let r = d.norm();
                    (r <= cap && bad(self.values[iy * m + ix])).then_some((r, d))
                })
            })
            .collect();
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.x.total_cmp(&b.1.x)).then(a.1.y.total_cmp(&b.1.y)));
        found
    }

    /// Largest radius `r ≤ cap` such that the ball `B(z, r)` holds no point
    /// where `bad(f(x))`. Refined nodes locate the nearest offending region;
    /// the boundary is then resolved along rays by bisection on the exact
    /// interpolant `f` and minimized over the ray angle.
    fn clear_radius(&self, z: Vec2, f: impl Fn(Vec2) -> f64 + Sync, bad: impl Fn(f64) -> bool + Sync) -> f64 {
        let h = self.grid.spacing();
        let cap = 0.25 * self.grid.side_length();
        let nodes = self.bad_nodes(z, cap, &bad);
        let Some(&(d1, _)) = nodes.first() else {
            return cap;
        };
        let tol = 1e-12 * self.grid.side_length();
        let crossing = |angle: f64| -> f64 {
            let e = Vec2::new(angle.cos(), angle.sin());
            let is_bad = |r: f64| bad(f(z + e * r));
            let mut hi = d1 + 2.0 * h;
            // walk outward until the ray is off the plateau (or the cap is hit)
            let mut lo = (d1 - 2.0 * h).max(0.0);
            while lo > 0.0 && is_bad(lo) {
                lo = (lo - h).max(0.0);
            }
            let mut probe = lo;
            while probe < hi {
                let next = (probe + 0.25 * h).min(hi);
                if is_bad(next) {
                    hi = next;
                    break;
                }
                lo = next;
                probe = next;
            }
            if !is_bad(hi) {
                return f64::INFINITY;
            }
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if is_bad(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            lo
        };
        let candidates: Vec<f64> = nodes
            .iter()
            .take_while(|(d, _)| *d <= d1 + h)
            .take(24)
            .map(|(_, d)| d.y.atan2(d.x))
            .collect();
        let (best_angle, mut best) = candidates
            .par_iter()
            .map(|&a| (a, crossing(a)))
            .reduce(
                || (0.0, f64::INFINITY),
                |a, b| if (b.1, b.0) < (a.1, a.0) { b } else { a },
            );
        if best.is_finite() {
            let width = h / d1.max(h);
            let (mut a, mut b) = (best_angle - width, best_angle + width);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut c = b - g * (b - a);
            let mut d = a + g * (b - a);
            let (mut fc, mut fd) = (crossing(c), crossing(d));
            for _ in 0..40 {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = crossing(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = crossing(d);
                }
            }
            best = best.min(fc).min(fd);
        } else {
            best = d1;
        }
        best.min(cap)
    }
}

/// Plateau radius: the largest `r ≤ L/4` with `|θ − β| ≤ tol` on `B(z, r)`,
/// located on the `h/2` refinement and resolved on the trigonometric
/// interpolant. Zero when `θ(z)` itself is off the plateau.
pub fn plateau_radius(theta: &SpectralField, z: Vec2, beta: f64, tol: f64) -> Result<f64> {
    plateau_radius_refined(&RefinedSamples::new(theta), theta, z, beta, tol)
}

pub fn plateau_radius_refined(
    refined: &RefinedSamples,
    theta: &SpectralField,
    z: Vec2,
    beta: f64,
    tol: f64,
) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::OutOfRange {
            name: "tol_plateau",
            value: tol,
            expected: "tol > 0",
        });
    }
    if (theta.eval_at(z) - beta).abs() > tol {
        return Ok(0.0);
    }
    let eval = |x: Vec2| theta.eval_at(x);
    Ok(refined.clear_radius(z, eval, |v| (v - beta).abs() > tol))
}

/// Gradient variant: the largest radius on which `|∇θ| ≤ tol`.
pub fn plateau_radius_gradient(theta: &SpectralField, z: Vec2, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::OutOfRange {
            name: "tol_gradient",
            value: tol,
            expected: "tol > 0",
        });
    }
    let grad = theta.gradient();
    if grad.eval_at(z).norm() > tol {
        return Ok(0.0);
    }
    let gx = grad.x.upsample(2);
    let gy = grad.y.upsample(2);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
    let eval = |x: Vec2| grad.eval_at(x).norm();
    Ok(RefinedSamples::from_values(*theta.grid(), mag).clear_radius(z, eval, |v| v > tol))
}

fn check_blowup_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r < std::f64::consts::E) {
        return Err(Error::OutOfRange {
            name: "R",
            value: r,
            expected: "0 < R < e (so that 1 − ln R > 0)",
        });
    }
    Ok(())
}

fn circle_point(z: Vec2, r: f64, k: usize, n: usize) -> Vec2 {
    let a = std::f64::consts::TAU * k as f64 / n as f64;
    z + Vec2::new(r * a.cos(), r * a.sin())
}

fn blowup_quotient(z: Vec2, r: f64, vz: Vec2, points: &[Vec2], values: &[Vec2]) -> f64 {
    let denom = r * r * (1.0 - r.ln());
    points
        .iter()
        .zip(values)
        .map(|(x, vx)| -(*x - z).dot(*vx - vz) / denom)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `𝒩(v, z, R) = max_{|x−z|=R} −(x−z)·(v(x)−v(z)) / (R²(1 − ln R))` for a
/// velocity given pointwise; samples `n` and `2n` equi-angular points.
pub fn blowup_functional_fn(v: impl Fn(Vec2) -> Vec2 + Sync, z: Vec2, r: f64, n_samples: usize) -> Result<f64> {
    check_blowup_radius(r)?;
    let m = 2 * n_samples.max(1);
    let points: Vec<Vec2> = (0..m).map(|k| circle_point(z, r, k, m)).collect();
    let values: Vec<Vec2> = points.par_iter().map(|&p| v(p)).collect();
    Ok(blowup_quotient(z, r, v(z), &points, &values))
}

/// [`blowup_functional_fn`] for a spectral velocity, evaluated by exact
/// Fourier summation.
pub fn blowup_functional(v: &VectorField, z: Vec2, r: f64, n_samples: usize) -> Result<f64> {
    check_blowup_radius(r)?;
    let m = 2 * n_samples.max(1);
    let points: Vec<Vec2> = (0..m).map(|k| circle_point(z, r, k, m)).collect();
    let values = v.eval_many(&points);
    Ok(blowup_quotient(z, r, v.eval_at(z), &points, &values))
}

/// Outcome of a sampled log-Lipschitz audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLipschitzReport {
    /// Supremum of `|f(x)−f(y)| / (|x−y|(1 − ln|x−y|))` over the sample.
    pub ll_sup: f64,
    pub blowup: f64,
    pub holds: bool,
}

/// Log-Lipschitz quotient of one pair; `None` outside `0 < |x−y| < 1`.
pub fn log_lipschitz_quotient(fx: Vec2, fy: Vec2, x: Vec2, y: Vec2) -> Option<f64> {
    let d = (x - y).norm();
    (d > 0.0 && d < 1.0).then(|| (fx - fy).norm() / (d * (1.0 - d.ln())))
}

/// Sampled `‖v‖_{LL}` over `pairs` together with the circle pairs `(z, x)`,
/// `|x − z| = R`, and the check `𝒩(v, z, R) ≤ ‖v‖_{LL}`.
pub fn log_lipschitz_bound_check(
    v: impl Fn(Vec2) -> Vec2 + Sync,
    z: Vec2,
    r: f64,
    n_samples: usize,
    pairs: &[(Vec2, Vec2)],
) -> Result<LogLipschitzReport> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::OutOfRange {
            name: "R",
            value: r,
            expected: "0 < R < 1",
        });
    }
    let blowup = blowup_functional_fn(&v, z, r, n_samples)?;
    let m = 2 * n_samples.max(1);
    let vz = v(z);
    let circle = (0..m)
        .into_par_iter()
        .filter_map(|k| {
            let x = circle_point(z, r, k, m);
            log_lipschitz_quotient(v(x), vz, x, z)
        })
        .reduce(|| 0.0, f64::max);
    let extra = pairs
        .par_iter()
        .filter_map(|&(x, y)| log_lipschitz_quotient(v(x), v(y), x, y))
        .reduce(|| 0.0, f64::max);
    let ll_sup = circle.max(extra);
    Ok(LogLipschitzReport {
        ll_sup,
        blowup,
        holds: blowup <= ll_sup * (1.0 + 1e-12),
    })
}

/// Margins `R(t) − bound(t)` for one vortex.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusAudit {
    pub times: Vec<f64>,
    pub radius: Vec<f64>,
    /// `R(0)·exp(−∫‖∇v‖_∞)`.
    pub lemma_bound: Vec<f64>,
    /// `exp(1 − exp(∫𝒩 + ln(1 − ln R(0))))`.
    pub osgood_bound: Vec<f64>,
    pub lemma_margin: Vec<f64>,
    pub osgood_margin: Vec<f64>,
}

impl RadiusAudit {
    pub fn min_lemma_margin(&self) -> f64 {
        self.lemma_margin.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_osgood_margin(&self) -> f64 {
        self.osgood_margin.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn cumulative_trapezoid(t: &[f64], f: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; t.len()];
    for i in 1..t.len() {
        acc[i] = acc[i - 1] + 0.5 * (t[i] - t[i - 1]) * (f[i] + f[i - 1]);
    }
    acc
}

/// Audits the exponential and Osgood lower bounds on `R_i(t)` along a
/// record stream. Integrals use the trapezoidal rule over the samples.
pub fn radius_lower_bound_audit(records: &[DiagnosticsRecord], vortex: usize) -> Result<RadiusAudit> {
    if records.is_empty() {
        return Err(Error::Invalid("no samples".into()));
    }
    if records.iter().any(|r| vortex >= r.vortex_count()) {
        return Err(Error::Invalid(format!("vortex index {vortex} out of range")));
    }
    let times: Vec<f64> = records.iter().map(|r| r.t).collect();
    let radius: Vec<f64> = records.iter().map(|r| r.plateau_radius[vortex]).collect();
    let grad: Vec<f64> = records.iter().map(|r| r.grad_velocity[vortex]).collect();
    let blowup: Vec<f64> = records.iter().map(|r| r.blowup[vortex]).collect();
    let r0 = radius[0];
    let int_grad = cumulative_trapezoid(&times, &grad);
    let int_n = cumulative_trapezoid(&times, &blowup);
    let lemma_bound: Vec<f64> = int_grad.iter().map(|g| r0 * (-g).exp()).collect();
    let log_term = (1.0 - r0.ln()).ln();
    let osgood_bound: Vec<f64> = int_n.iter().map(|i| (1.0 - (i + log_term).exp()).exp()).collect();
    let lemma_margin = radius.iter().zip(&lemma_bound).map(|(r, b)| r - b).collect();
    let osgood_margin = radius.iter().zip(&osgood_bound).map(|(r, b)| r - b).collect();
    Ok(RadiusAudit {
        times,
        radius,
        lemma_bound,
        osgood_bound,
        lemma_margin,
        osgood_margin,
    })
}

/// Energy growth along a record stream and the reference existence times.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    /// `sup_{t ≤ T} E(t)/E(0)` at every sample time `T`.
    pub growth: Vec<f64>,
    pub max_growth: f64,
    /// `1/(E(0)^{5+3k−6s} + E(0)^{1/2})`.
    pub time_scale: f64,
    /// Same with exponent `6 + 3k − 6s`.
    pub time_scale_alt: f64,
    /// Index of the first sample with `R = 0`, where the stream stops.
    pub truncated_at: Option<usize>,
}

/// Reference existence-time scale `1/(E^q + E^{1/2})`.
pub fn existence_time_scale(e0: f64, exponent: f64) -> f64 {
    1.0 / (e0.powf(exponent) + e0.sqrt())
}

/// `E(t) = ‖θ‖²_{H^k} + 1/min_i R_i(t)` for integer `k ∈ 1..=4`.
pub fn energy_and_time_bound(records: &[DiagnosticsRecord], k: usize, s: f64) -> Result<EnergyReport> {
    if !(1..=4).contains(&k) {
        return Err(Error::OutOfRange {
            name: "k",
            value: k as f64,
            expected: "k ∈ {1, 2, 3, 4}",
        });
    }
    if records.is_empty() {
        return Err(Error::Invalid("no samples".into()));
    }
    let mut times = Vec::new();
    let mut energy = Vec::new();
    let mut truncated_at = None;
    for (i, r) in records.iter().enumerate() {
        let rmin = r.plateau_radius.iter().copied().fold(f64::INFINITY, f64::min);
        if rmin <= 0.0 {
            truncated_at = Some(i);
            times.push(r.t);
            energy.push(f64::INFINITY);
            break;
        }
        times.push(r.t);
        energy.push(r.sobolev_norms[k - 1].powi(2) + 1.0 / rmin);
    }
    let e0 = energy[0];
    let mut growth = Vec::with_capacity(energy.len());
    let mut sup = 0.0_f64;
    for e in &energy {
        sup = sup.max(e / e0);
        growth.push(sup);
    }
    let kf = k as f64;
    Ok(EnergyReport {
        max_growth: sup,
        time_scale: existence_time_scale(e0, 5.0 + 3.0 * kf - 6.0 * s),
        time_scale_alt: existence_time_scale(e0, 6.0 + 3.0 * kf - 6.0 * s),
        times,
        energy,
        growth,
        truncated_at,
    })
}

/// Distance between two runs sampled at matching times.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub times: Vec<f64>,
    /// `‖θ₂ − θ₁‖_{H^ℓ} + |z₂ − z₁|`.
    pub gap: Vec<f64>,
    /// Least-squares fit of `ln gap` against `t`; `None` when the gap
    /// vanishes somewhere.
    pub fit: Option<LineFit>,
}

impl StabilityReport {
    pub fn rate(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    pub fn identically_zero(&self) -> bool {
        self.gap.iter().all(|g| *g == 0.0)
    }
}

/// Gap between two trajectories; `|z₂ − z₁|` is the Euclidean norm over
/// all vortices.
pub fn stability_gap(run_a: &[CoupledState], run_b: &[CoupledState], ell: f64) -> Result<StabilityReport> {
    if run_a.len() != run_b.len() {
        return Err(Error::DimensionMismatch {
            expected: run_a.len(),
            actual: run_b.len(),
        });
    }
    let mut times = Vec::with_capacity(run_a.len());
    let mut gap = Vec::with_capacity(run_a.len());
    for (a, b) in run_a.iter().zip(run_b) {
        a.theta.check_grid(&b.theta)?;
        if a.vortices.len() != b.vortices.len() {
            return Err(Error::DimensionMismatch {
                expected: a.vortices.len(),
                actual: b.vortices.len(),
            });
        }
        let dtheta = sobolev_norm(&b.theta.sub(&a.theta)?, ell);
        let dz: f64 = a
            .vortices
            .positions()
            .iter()
            .zip(b.vortices.positions())
            .map(|(p, q)| (*q - *p).norm_sq())
            .sum::<f64>()
            .sqrt();
        times.push(a.t);
        gap.push(dtheta + dz);
    }
    let fit = if gap.iter().all(|g| *g > 0.0) {
        let logs: Vec<f64> = gap.iter().map(|g| g.ln()).collect();
        fit_line(&times, &logs)
    } else {
        None
    };
    Ok(StabilityReport { times, gap, fit })
}

fn inner_product(f: &SpectralField, g: &SpectralField) -> f64 {
    let l = f.grid().side_length();
    let sum: f64 = f
        .coeffs()
        .iter()
        .zip(g.coeffs())
        .map(|(a, b)| (a * b.conj()).re)
        .sum();
    l * l * sum
}

fn product(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    let a = f.to_physical();
    let b = g.to_physical();
    let p: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    SpectralField::from_physical(&p, *f.grid())
}

/// Both sides of `∫θ (K_s⋆θ)·∇φ = −½ ∫(K_s⋆θ)·[(−Δ)^s, ∇φ](−Δ)^{−s}θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommutatorSides {
    pub lhs: f64,
    pub rhs: f64,
}

impl CommutatorSides {
    /// `|LHS − RHS| / (1 + |LHS|)`.
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).abs() / (1.0 + self.lhs.abs())
    }
}

/// Evaluates both sides of the commutator identity pseudo-spectrally.
/// Integrals of products are taken by Parseval; pointwise products are
/// exact when θ and φ keep the top third of the spectrum empty.
pub fn commutator_sides(theta: &SpectralField, phi: &SpectralField, s: f64) -> Result<CommutatorSides> {
    theta.check_grid(phi)?;
    let scale = theta.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    if theta.mean().abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NonzeroMean { mean: theta.mean() });
    }
    let v = biot_savart(theta, s)?;
    let grad_phi = phi.gradient();
    let g = fractional_laplacian(theta, -s);
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for (vm, dphi) in [(&v.x, &grad_phi.x), (&v.y, &grad_phi.y)] {
        let theta_dphi = product(theta, dphi)?;
        lhs += inner_product(&theta_dphi, vm);
        let comm = fractional_laplacian(&product(dphi, &g)?, s).sub(&theta_dphi)?;
        rhs += inner_product(vm, &comm);
    }
    Ok(CommutatorSides { lhs, rhs: -0.5 * rhs })
}

/// `|LHS − RHS| / (1 + |LHS|)` of the commutator identity.
pub fn commutator_residual(theta: &SpectralField, phi: &SpectralField, s: f64) -> Result<f64> {
    commutator_sides(theta, phi, s).map(|c| c.residual())
}

/// `sup |v_mult − v_conv|` over grid nodes where `|θ| ≥ threshold·‖θ‖_∞`,
/// with `v_mult` the Fourier multiplier velocity and `v_conv = K_{s,ε}⋆θ`.
pub fn velocity_path_gap(theta: &SpectralField, params: &KernelParams, threshold: f64) -> Result<f64> {
    let grid = theta.grid();
    let exact = biot_savart(theta, params.s())?;
    let approx = KernelConvolver::new(grid, params)?.apply(theta)?;
    let (ex, ey) = exact.to_physical();
    let (ax, ay) = approx.to_physical();
    let values = theta.to_physical();
    let sup = lp_norm_values(&values, grid, f64::INFINITY);
    Ok(values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() >= threshold * sup)
        .map(|(i, _)| (ex[i] - ax[i]).hypot(ey[i] - ay[i]))
        .fold(0.0, f64::max))
}

/// Per-vortex margin `c_s‖θ‖_{L¹}/R_i^{3−2s} − |v(z_i)|`; `+∞` when
/// `R_i = 0` (the bound is vacuous).
pub fn collapse_velocity_bound_audit(
    theta: &SpectralField,
    vortices: &VortexEnsemble,
    radii: &[f64],
    s: f64,
) -> Result<Vec<f64>> {
    if radii.len() != vortices.len() {
        return Err(Error::DimensionMismatch {
            expected: vortices.len(),
            actual: radii.len(),
        });
    }
    let c_s = c_s_constant(s)?;
    let l1 = lp_norm_values(&theta.to_physical(), theta.grid(), 1.0);
    let v = biot_savart(theta, s)?;
    Ok(vortices
        .positions()
        .iter()
        .zip(radii)
        .map(|(z, r)| {
            if *r <= 0.0 {
                f64::INFINITY
            } else {
                c_s * l1 / r.powf(3.0 - 2.0 * s) - v.eval_at(*z).norm()
            }
        })
        .collect())
}

/// Produces [`DiagnosticsRecord`]s along a run and keeps the running
/// `∫‖θ‖_{H^{3−2s}}`.
pub struct Sampler {
    s: f64,
    energy_order: f64,
    tol_plateau: f64,
    circle_samples: usize,
    last: Option<(f64, f64)>,
    integral: f64,
}

impl Sampler {
    pub fn new(cfg: &SimConfig, initial: &CoupledState) -> Result<Self> {
        let tol_plateau = match cfg.tol_plateau {
            Some(t) => t,
            None => {
                let sup = lp_norm_values(&initial.theta.to_physical(), &cfg.grid, f64::INFINITY);
                // a vanishing θ₀ still needs a positive tolerance
                if sup > 0.0 { 1e-6 * sup } else { 1e-12 }
            }
        };
        Ok(Self {
            s: cfg.s,
            energy_order: cfg.energy_order,
            tol_plateau,
            circle_samples: cfg.circle_samples / 2,
            last: None,
            integral: 0.0,
        })
    }

    pub fn tol_plateau(&self) -> f64 {
        self.tol_plateau
    }

    /// Velocity seen by each vortex's plateau: `v + Σ_{j≠i} a_j H_j`.
    fn background_fields(
        &self,
        solver: &VortexWaveSolver,
        v: &VectorField,
        ens: &VortexEnsemble,
    ) -> Result<Vec<VectorField>> {
        if ens.len() == 1 {
            return Ok(vec![v.clone()]);
        }
        let singles = ens
            .positions()
            .iter()
            .zip(ens.intensities())
            .map(|(z, a)| solver.vortex_field(&VortexEnsemble::with_intensities(vec![*z], vec![*a])?))
            .collect::<Result<Vec<_>>>()?;
        (0..ens.len())
            .map(|i| {
                let mut w = v.clone();
                for (j, h) in singles.iter().enumerate() {
                    if j != i {
                        w = w.add(h)?;
                    }
                }
                Ok(w)
            })
            .collect()
    }

    pub fn sample(&mut self, solver: &VortexWaveSolver, state: &CoupledState) -> Result<DiagnosticsRecord> {
        let theta = &state.theta;
        let grid = *theta.grid();
        let values = theta.to_physical();
        let mut lp_norms = [0.0; 4];
        for (out, p) in lp_norms.iter_mut().zip(LP_EXPONENTS) {
            *out = lp_norm_values(&values, &grid, p);
        }
        let mut sobolev_norms = [0.0; 4];
        for (out, k) in sobolev_norms.iter_mut().zip(SOBOLEV_ORDERS) {
            *out = sobolev_norm(theta, k);
        }
        let sobolev_critical = sobolev_norm(theta, 3.0 - 2.0 * self.s);
        if let Some((t_prev, h_prev)) = self.last {
            self.integral += 0.5 * (state.t - t_prev) * (sobolev_critical + h_prev);
        }
        self.last = Some((state.t, sobolev_critical));

        let ens = &state.vortices;
        let v = solver.velocity(theta)?;
        let backgrounds = self.background_fields(solver, &v, ens)?;
        let refined = RefinedSamples::new(theta);
        let h = grid.spacing();
        let mut plateau = Vec::with_capacity(ens.len());
        let mut plateau_grad = Vec::with_capacity(ens.len());
        let mut blowup = Vec::with_capacity(ens.len());
        let mut grad_velocity = Vec::with_capacity(ens.len());
        let mut vortex_speed = Vec::with_capacity(ens.len());
        for (i, (&z, &beta)) in ens.positions().iter().zip(ens.plateau_values()).enumerate() {
            let r = plateau_radius_refined(&refined, theta, z, beta, self.tol_plateau)?;
            plateau.push(r);
            plateau_grad.push(plateau_radius_gradient(theta, z, self.tol_plateau / h)?);
            let w = &backgrounds[i];
            grad_velocity.push(w.max_gradient_norm());
            vortex_speed.push(v.eval_at(z).norm());
            let n = if r > 0.0 && r < std::f64::consts::E {
                blowup_functional(w, z, r, self.circle_samples)?
            } else {
                f64::NAN
            };
            blowup.push(n);
        }
        let rmin = plateau.iter().copied().fold(f64::INFINITY, f64::min);
        let energy = sobolev_norm(theta, self.energy_order).powi(2) + 1.0 / rmin;
        Ok(DiagnosticsRecord {
            t: state.t,
            mean: theta.mean(),
            lp_norms,
            sobolev_norms,
            sobolev_critical,
            critical_integral: self.integral,
            grad_velocity,
            plateau_radius: plateau,
            plateau_radius_grad: plateau_grad,
            blowup,
            vortex_speed,
            positions: ens.positions().to_vec(),
            energy,
            hamiltonian: hamiltonian(ens, self.s)?,
            moment: moment_of_inertia(ens),
            min_distance: min_distance(ens.positions()),
            stability_gap: None,
        })
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::bump;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band_limited(grid: GridSpec, rng: &mut ChaCha8Rng, kmax: i64) -> SpectralField {
        let n = grid.n();
        let mut values = vec![0.0; grid.len()];
        for ky in -kmax..=kmax {
            for kx in -kmax..=kmax {
                let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                for (idx, v) in values.iter_mut().enumerate() {
                    let x = grid.node(idx % n, idx / n);
                    let ph = grid.fundamental() * (kx as f64 * x.x + ky as f64 * x.y);
                    *v += a * ph.cos() + b * ph.sin();
                }
            }
        }
        SpectralField::from_physical(&values, grid).unwrap()
    }

    #[test]
    fn float_formatting_round_trips() {
        assert_eq!(format_f64(0.1), "0.1");
        assert_eq!(format_f64(1e-300), "1e-300");
        assert_eq!(format_f64(f64::NAN), "nan");
        assert_eq!(format_f64(f64::NEG_INFINITY), "-inf");
        let x = 0.1 + 0.2;
        assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn plateau_constant_field_hits_cap() {
        let g = GridSpec::new(4.0, 32).unwrap();
        let theta = SpectralField::from_fn(g, |_| 0.7);
        assert_eq!(plateau_radius(&theta, g.center(), 0.7, 1e-6).unwrap(), 1.0);
    }

    #[test]
    fn plateau_off_value_is_zero() {
        let g = GridSpec::new(4.0, 32).unwrap();
        let theta = SpectralField::from_fn(g, |_| 0.7 + 1e-5);
        assert_eq!(plateau_radius(&theta, g.center(), 0.7, 1e-6).unwrap(), 0.0);
    }

    fn bump_field(g: GridSpec, beta: f64, x0: Vec2, rho: f64) -> SpectralField {
        SpectralField::from_fn(g, move |x| beta + bump((x - x0).norm() / rho))
    }

    #[test]
    fn plateau_radius_of_bump_complement() {
        let g = GridSpec::new(4.0, 256).unwrap();
        let h = g.spacing();
        let x0 = Vec2::new(1.6, 2.0);
        let rho = 0.5;
        let tol = 1e-3;
        let theta = bump_field(g, 0.3, x0, rho);
        let z = Vec2::new(2.45, 2.0);
        let r = plateau_radius(&theta, z, 0.3, tol).unwrap();
        // radius at which the bump itself reaches the tolerance
        let (mut lo, mut hi) = (0.5, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if bump(mid) > tol { lo = mid } else { hi = mid }
        }
        let expected = (z - x0).norm() - rho * lo;
        assert!((r - expected).abs() <= h, "R = {r}, expected ≈ {expected}");
        assert!(r > (z - x0).norm() - rho);
    }

    #[test]
    fn plateau_radius_is_monotone_in_tolerance() {
        let g = GridSpec::new(4.0, 64).unwrap();
        let theta = bump_field(g, 0.0, Vec2::new(1.5, 2.1), 0.6);
        let z = Vec2::new(2.6, 1.9);
        let mut prev = 0.0;
        for e in (2..=9).rev() {
            let r = plateau_radius(&theta, z, 0.0, 10f64.powi(-e)).unwrap();
            assert!(r >= prev, "tol 1e-{e}: {r} < {prev}");
            prev = r;
        }
    }

    #[test]
    fn blowup_closed_forms() {
        let z = Vec2::new(0.3, -0.2);
        let r = 0.2;
        let c = blowup_functional_fn(|_| Vec2::new(1.5, -2.0), z, r, 256).unwrap();
        assert_eq!(c, 0.0);
        let rot = blowup_functional_fn(|x| (x - z).perp() * 3.0, z, r, 256).unwrap();
        assert!(rot.abs() < 1e-10, "{rot}");
        let lambda = 1.7;
        let strain = blowup_functional_fn(|x| (x - z) * -lambda, z, r, 256).unwrap();
        let exact = lambda / (1.0 - r.ln());
        assert!((strain - exact).abs() < 1e-10, "{strain} vs {exact}");
        assert!(blowup_functional_fn(|_| Vec2::ZERO, z, 0.0, 256).is_err());
    }

    #[test]
    fn spectral_blowup_matches_pointwise() {
        let g = GridSpec::new(4.0, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let theta = random_band_limited(g, &mut rng, 3);
        let v = biot_savart(&theta.sub(&SpectralField::from_fn(g, |_| theta.mean())).unwrap(), 0.7).unwrap();
        let z = Vec2::new(1.9, 2.2);
        let a = blowup_functional(&v, z, 0.3, 64).unwrap();
        let b = blowup_functional_fn(|x| v.eval_at(x), z, 0.3, 64).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn log_lipschitz_dominates_blowup() {
        let z = Vec2::new(0.1, 0.4);
        let lambda = 0.8;
        let rep = log_lipschitz_bound_check(|x| (x - z) * -lambda, z, 0.25, 128, &[]).unwrap();
        assert!(rep.holds);
        assert!((rep.ll_sup - lambda / (1.0 - 0.25f64.ln())).abs() < 1e-12);
        let zero = log_lipschitz_bound_check(|_| Vec2::new(2.0, 1.0), z, 0.25, 128, &[]).unwrap();
        assert_eq!((zero.ll_sup, zero.blowup), (0.0, 0.0));
        assert!(zero.holds);
    }

    fn record(t: f64, r: f64, grad: f64, n: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            mean: 0.0,
            lp_norms: [0.0; 4],
            sobolev_norms: [1.0, 1.0, 1.0, 1.0],
            sobolev_critical: 1.0,
            critical_integral: 0.0,
            grad_velocity: vec![grad],
            plateau_radius: vec![r],
            plateau_radius_grad: vec![r],
            blowup: vec![n],
            vortex_speed: vec![0.0],
            positions: vec![Vec2::ZERO],
            energy: 0.0,
            hamiltonian: 0.0,
            moment: 0.0,
            min_distance: f64::INFINITY,
            stability_gap: None,
        }
    }

    #[test]
    fn radius_audit_without_flow_is_tight() {
        let recs: Vec<_> = (0..5).map(|i| record(0.1 * i as f64, 0.25, 0.0, 0.0)).collect();
        let audit = radius_lower_bound_audit(&recs, 0).unwrap();
        assert!(audit.lemma_margin.iter().all(|m| m.abs() < 1e-15));
        assert!(audit.osgood_margin.iter().all(|m| m.abs() < 1e-15));
    }

    #[test]
    fn radius_audit_exponential_decay() {
        // R(t) = R0 e^{−t} with ‖∇v‖ = 1 is exactly the lemma's bound
        let recs: Vec<_> = (0..=100)
            .map(|i| {
                let t = 0.01 * i as f64;
                record(t, 0.25 * (-t).exp(), 1.0, 0.0)
            })
            .collect();
        let audit = radius_lower_bound_audit(&recs, 0).unwrap();
        assert!(audit.min_lemma_margin().abs() < 1e-14);
    }

    #[test]
    fn energy_of_static_stream_is_constant() {
        let recs: Vec<_> = (0..4).map(|i| record(i as f64, 0.5, 0.0, 0.0)).collect();
        let rep = energy_and_time_bound(&recs, 4, 0.75).unwrap();
        assert!(rep.energy.iter().all(|e| *e == 3.0));
        assert_eq!(rep.max_growth, 1.0);
        assert_eq!(rep.truncated_at, None);
        let mut broken = recs.clone();
        broken[2].plateau_radius[0] = 0.0;
        let rep = energy_and_time_bound(&broken, 4, 0.75).unwrap();
        assert_eq!(rep.truncated_at, Some(2));
        assert_eq!(rep.energy.len(), 3);
        assert!(rep.energy[2].is_infinite());
    }

    #[test]
    fn time_scale_doubling() {
        let k = 4.0;
        let s = 0.75;
        let q = 5.0 + 3.0 * k - 6.0 * s;
        let e = 1e3;
        // doubling ‖θ‖_{H^k} quadruples E in the dominant regime
        let ratio = existence_time_scale(e, q) / existence_time_scale(4.0 * e, q);
        let expected = 2f64.powf(2.0 * q);
        assert!((ratio / expected - 1.0).abs() < 1e-6);
    }

    #[test]
    fn commutator_trivial_cases() {
        let g = GridSpec::new(4.0, 32).unwrap();
        let zero = SpectralField::zeros(g);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let phi = random_band_limited(g, &mut rng, 2);
        assert_eq!(commutator_residual(&zero, &phi, 0.75).unwrap(), 0.0);
        let mut theta = random_band_limited(g, &mut rng, 3);
        theta.coeffs_mut()[0] = 0.0.into();
        let constant = SpectralField::from_fn(g, |_| 2.0);
        let sides = commutator_sides(&theta, &constant, 0.75).unwrap();
        assert_eq!((sides.lhs, sides.rhs), (0.0, 0.0));
        let shifted = theta.add(&constant).unwrap();
        assert!(matches!(commutator_residual(&shifted, &phi, 0.75), Err(Error::NonzeroMean { .. })));
    }

    #[test]
    fn commutator_identity_on_band_limited_data() {
        let g = GridSpec::new(2.0 * std::f64::consts::PI, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for s in [0.5, 0.6, 0.75, 0.9] {
            let mut theta = random_band_limited(g, &mut rng, 4);
            theta.coeffs_mut()[0] = 0.0.into();
            let phi = random_band_limited(g, &mut rng, 3);
            let sides = commutator_sides(&theta, &phi, s).unwrap();
            assert!(sides.lhs.abs() > 1e-3, "degenerate sample");
            assert!(sides.residual() < 1e-8, "s = {s}: {sides:?}");
        }
    }

    #[test]
    fn collapse_audit_trivial() {
        let g = GridSpec::new(4.0, 32).unwrap();
        let ens = VortexEnsemble::with_intensities(vec![g.center()], vec![1.0]).unwrap();
        let m = collapse_velocity_bound_audit(&SpectralField::zeros(g), &ens, &[0.5], 0.75).unwrap();
        assert_eq!(m, vec![0.0]);
        let c = g.center();
        let radial = SpectralField::from_fn(g, |x| (-(x - c).norm_sq() * 4.0).exp());
        let radial = radial.sub(&SpectralField::from_fn(g, |_| radial.mean())).unwrap();
        let m = collapse_velocity_bound_audit(&radial, &ens, &[0.5], 0.75).unwrap();
        assert!(m[0] > 0.0);
        let v = biot_savart(&radial, 0.75).unwrap().eval_at(c).norm();
        assert!(v < 1e-12, "{v}");
    }

    #[test]
    fn csv_shape() {
        let rec = record(0.5, 0.2, 1.0, 0.3);
        let header = DiagnosticsRecord::csv_header(1);
        assert_eq!(header.len(), rec.csv_row().len());
        let text = write_csv(&[rec.clone(), rec]).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().ends_with(','));
    }

    #[test]
    fn stability_of_identical_runs_is_zero() {
        let g = GridSpec::new(4.0, 32).unwrap();
        let ens = VortexEnsemble::with_intensities(vec![g.center()], vec![1.0]).unwrap();
        let st = CoupledState {
            t: 0.0,
            theta: SpectralField::from_fn(g, |x| x.x.sin()),
            vortices: ens,
        };
        let rep = stability_gap(&[st.clone(), st.clone()], &[st.clone(), st], 2.0).unwrap();
        assert!(rep.identically_zero());
        assert!(rep.fit.is_none());
    }
}
