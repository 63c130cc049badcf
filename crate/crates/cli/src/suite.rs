//! The acceptance suite behind `gsqg check`: twelve criteria, one verdict
//! line each.

use std::f64::consts::PI;
use std::fmt;
use std::time::{Duration, Instant};

use gsqg::coupled::{simulate_with, CoupledState, SimConfig, TimeStepPolicy, VortexWaveSolver};
use gsqg::diagnostics::{
    blowup_functional_fn, commutator_residual, log_lipschitz_bound_check, radius_lower_bound_audit, stability_gap,
    velocity_path_gap, DiagnosticsRecord,
};
use gsqg::fit::fit_log_log;
use gsqg::kernels::{c_s_constant, eval_k_s, eval_k_s_eps, KernelParams};
use gsqg::pointvortex::{conservation_audit, integrate, step, Integrator, VortexEnsemble};
use gsqg::spectral::{
    bernstein_check, biot_savart, dyadic_decompose, inhomogeneous_block, lp_norm, top_block_index, BernsteinReport,
    GridSpec, SpectralField,
};
use gsqg::Vec2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::setup_from_str;
use crate::error::{CliError, Result};
use crate::run::{run_simulate, DIAGNOSTICS_CSV};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Fails for a reason established analytically; does not fail the suite.
    KnownFail,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::KnownFail => "FAIL (known)",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{:>2}] {:<28} {:<12} {} ({:.1} s)",
            self.id,
            self.name,
            self.status.to_string(),
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

struct Verdict {
    status: Status,
    detail: String,
}

impl Verdict {
    fn gate(ok: bool, detail: String) -> Self {
        Self {
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        }
    }
}

type Check = fn() -> Result<Verdict>;

const CRITERIA: [(u8, &str, Check); 12] = [
    (1, "kernel exactness", kernel_exactness),
    (2, "constant c_s", constant_c_s),
    (3, "two-vortex oracle", two_vortex_oracle),
    (4, "vortex conservation", vortex_conservation),
    (5, "theta conservation", theta_conservation),
    (6, "commutator identity", commutator_identity),
    (7, "velocity-path equivalence", velocity_path_equivalence),
    (8, "plateau persistence", plateau_persistence),
    (9, "blow-up functional", blowup_functional_cases),
    (10, "stability", stability),
    (11, "spectral infrastructure", spectral_infrastructure),
    (12, "determinism", determinism),
];

pub fn criterion_ids() -> Vec<u8> {
    CRITERIA.iter().map(|c| c.0).collect()
}

/// Runs the selected criteria (all when `only` is empty), calling `report`
/// as each finishes.
pub fn run_suite(only: &[u8], mut report: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let mut out = Vec::new();
    for &(id, name, check) in CRITERIA.iter() {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let verdict = check().unwrap_or_else(|e| Verdict {
            status: Status::Fail,
            detail: format!("error: {e}"),
        });
        let r = CriterionResult {
            id,
            name,
            status: verdict.status,
            detail: verdict.detail,
            elapsed: start.elapsed(),
        };
        report(&r);
        out.push(r);
    }
    out
}

/// `CheckFailed` unless every criterion passed or failed only for a known reason.
pub fn summarize(results: &[CriterionResult]) -> Result<()> {
    let failed = results.iter().filter(|r| r.status == Status::Fail).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::CheckFailed {
            failed,
            total: results.len(),
        })
    }
}

/// Random real band-limited field with `|k_x|, |k_y| ≤ kmax` and zero mean.
fn random_field(grid: GridSpec, rng: &mut ChaCha8Rng, kmax: i64) -> SpectralField {
    let n = grid.n();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
    for ky in 0..=kmax {
        for kx in -kmax..=kmax {
            if ky == 0 && kx <= 0 {
                continue;
            }
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            coeffs[grid.storage_index(ky) * n + grid.storage_index(kx)] = c;
            coeffs[grid.storage_index(-ky) * n + grid.storage_index(-kx)] = c.conj();
        }
    }
    SpectralField::from_coefficients(grid, coeffs).expect("sized to the grid")
}

fn kernel_exactness() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_ratio = 0.0f64;
    let (mut mismatches, mut odd_failures, mut outside) = (0usize, 0usize, 0usize);
    for s in [0.25, 0.5, 0.75, 0.9] {
        let params = KernelParams::new(s, 0.25)?;
        let c_s = params.c_s();
        for _ in 0..10_000 {
            let x = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let k = eval_k_s_eps(x, &params);
            let r = x.norm();
            if r >= params.eps() {
                outside += 1;
                let exact = eval_k_s(x, s)?;
                if k.x.to_bits() != exact.x.to_bits() || k.y.to_bits() != exact.y.to_bits() {
                    mismatches += 1;
                }
            }
            worst_ratio = worst_ratio.max(k.norm() / (c_s / r.powf(3.0 - 2.0 * s)));
            // IEEE equality: the zero branch yields +0 on both sides
            let m = eval_k_s_eps(-x, &params);
            if m.x != -k.x || m.y != -k.y {
                odd_failures += 1;
            }
        }
    }
    // a few ulps of slack in the pointwise bound
    let bound_ok = worst_ratio <= 1.0 + 8.0 * f64::EPSILON;
    Ok(Verdict::gate(
        mismatches == 0 && odd_failures == 0 && bound_ok,
        format!(
            "{mismatches} bit mismatches over {outside} points with |x| >= eps; max |K|/bound = {worst_ratio:.17}; {odd_failures} oddness failures"
        ),
    ))
}

fn constant_c_s() -> Result<Verdict> {
    let mut worst = 0.0f64;
    for i in 1..=9 {
        let s = i as f64 / 10.0;
        let reference = (1.0 - s) * libm::tgamma(1.0 - s) / (2f64.powf(2.0 * s - 1.0) * PI * libm::tgamma(s));
        worst = worst.max((c_s_constant(s)? - reference).abs() / reference);
    }
    let c1 = 1.0 / (2.0 * PI);
    let gap = (c_s_constant(0.999)? - c1).abs();
    // first-order term of c_s about s = 1
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let predicted = c1 * (2.0 * 2f64.ln() - 2.0 * EULER_GAMMA) * 1e-3;
    let gamma_ok = worst < 1e-12;
    let limit_ok = gap < 1e-6;
    let detail = format!(
        "Gamma agreement {worst:.2e} (< 1e-12); |c_s(0.999) - 1/(2 pi)| = {gap:.3e} (gate 1e-6, first-order prediction {predicted:.3e})"
    );
    let status = match (gamma_ok, limit_ok) {
        (true, true) => Status::Pass,
        // the gap is the analytic O(1 - s) term, not an evaluation error
        (true, false) if ((gap - predicted) / predicted).abs() < 0.05 => Status::KnownFail,
        _ => Status::Fail,
    };
    Ok(Verdict { status, detail })
}

fn two_vortex_oracle() -> Result<Verdict> {
    let start = Instant::now();
    let mut worst_orbit = 0.0f64;
    let mut worst_speed = 0.0f64;
    for s in [0.5, 0.75] {
        let c_s = c_s_constant(s)?;
        let (d, a) = (1.0, 1.0);
        let z0 = vec![Vec2::new(-0.5 * d, 0.0), Vec2::new(0.5 * d, 0.0)];
        let period = 2.0 * PI * d.powf(4.0 - 2.0 * s) / (2.0 * c_s * a);
        let mut ens = VortexEnsemble::with_intensities(z0.clone(), vec![a, a])?;
        let steps = 2000;
        for _ in 0..steps {
            ens = step(&ens, s, period / steps as f64, Integrator::Rk4)?;
        }
        let err = ens
            .positions()
            .iter()
            .zip(&z0)
            .map(|(p, q)| (*p - *q).norm())
            .fold(0.0, f64::max);
        worst_orbit = worst_orbit.max(err / d);

        let mut pair = VortexEnsemble::with_intensities(z0.clone(), vec![a, -a])?;
        let t = 1.0;
        for _ in 0..100 {
            pair = step(&pair, s, t / 100.0, Integrator::Rk4)?;
        }
        let expect = c_s * a / d.powf(3.0 - 2.0 * s);
        for (p, q) in pair.positions().iter().zip(&z0) {
            let v = (*p - *q).norm() / t;
            worst_speed = worst_speed.max((v - expect).abs() / expect);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok(Verdict::gate(
        worst_orbit < 1e-8 && worst_speed < 1e-8 && elapsed < 1.0,
        format!("orbit closure {worst_orbit:.2e}·d; translation speed rel. error {worst_speed:.2e}; {elapsed:.3} s"),
    ))
}

fn vortex_conservation() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut positions = Vec::new();
    while positions.len() < 5 {
        let p = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if positions.iter().all(|q: &Vec2| (p - *q).norm() > 0.3) {
            positions.push(p);
        }
    }
    let intensities: Vec<f64> = (0..5).map(|_| rng.gen_range(0.5..1.5)).collect();
    let ens = VortexEnsemble::with_intensities(positions, intensities)?;
    let mut worst = (0.0f64, 0.0f64);
    for s in [0.5, 0.75] {
        let traj = integrate(&ens, s, 1.0, 0.01, Integrator::AdaptiveRk45 { tol: 1e-10 })?;
        let drift = conservation_audit(&traj, s)?;
        worst = (worst.0.max(drift.hamiltonian), worst.1.max(drift.moment));
    }
    Ok(Verdict::gate(
        worst.0 < 1e-7 && worst.1 < 1e-7,
        format!("relative drift H {:.2e}, I {:.2e} (gate 1e-7)", worst.0, worst.1),
    ))
}

fn collect_records(
    cfg: &SimConfig,
    theta: &SpectralField,
    ens: VortexEnsemble,
) -> Result<(Vec<DiagnosticsRecord>, Vec<CoupledState>, gsqg::coupled::Termination)> {
    let mut states = Vec::new();
    let outcome = simulate_with(cfg, theta, ens, |st, _| states.push(st.clone()))?;
    Ok((outcome.records, states, outcome.termination))
}

fn theta_conservation() -> Result<Verdict> {
    let grid = GridSpec::new(4.0, 256)?;
    let h = grid.spacing();
    let blob = Vec2::new(1.6, 2.0);
    let theta = SpectralField::from_fn(grid, |x| (-(x - blob).norm_sq() / 0.09).exp()).dealiased();
    let mut details = Vec::new();
    let mut ok = true;
    for s in [0.5, 0.75] {
        let ens = VortexEnsemble::new(vec![Vec2::new(2.6, 2.0)], vec![0.2], vec![0.0])?;
        let mut cfg = SimConfig::new(grid, s, 8.0 * h);
        cfg.plateau_guard = false;
        cfg.t_end = 1.0;
        let solver = VortexWaveSolver::new(cfg.clone())?;
        let speed = solver.rhs(&solver.initial_state(&theta, ens.clone())?)?.max_speed;
        cfg.time_step = TimeStepPolicy::Fixed(0.5 * h / speed);
        let (records, _, termination) = collect_records(&cfg, &theta, ens)?;
        let t_final = records.last().map_or(0.0, |r| r.t);
        let first = &records[0];
        let mean_drift = records.iter().map(|r| (r.mean - first.mean).abs()).fold(0.0, f64::max);
        let rel = |k: usize| {
            records
                .iter()
                .map(|r| (r.lp_norms[k] - first.lp_norms[k]).abs() / first.lp_norms[k])
                .fold(0.0, f64::max)
                / t_final
        };
        let (l1, l2, l4, linf) = (rel(0), rel(1), rel(2), rel(3));
        ok &= termination.label() == "completed"
            && (t_final - 1.0).abs() < 1e-12
            && mean_drift < 1e-13
            && l2 < 1e-6
            && l1.max(l4).max(linf) < 1e-3;
        details.push(format!(
            "s={s}: mean {mean_drift:.1e}, L2 {l2:.1e}/t, L1 {l1:.1e}/t, L4 {l4:.1e}/t, Linf {linf:.1e}/t"
        ));
    }
    Ok(Verdict::gate(ok, details.join("; ")))
}

fn commutator_identity() -> Result<Verdict> {
    let start = Instant::now();
    // products of two kmax = n/6 fields stay inside the retained band
    let grid = GridSpec::new(2.0 * PI, 64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for s in [0.5, 0.6, 0.75, 0.9] {
        for _ in 0..5 {
            let theta = random_field(grid, &mut rng, 10);
            let phi = random_field(grid, &mut rng, 10);
            worst = worst.max(commutator_residual(&theta, &phi, s)?);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok(Verdict::gate(
        worst < 1e-8 && elapsed < 10.0,
        format!("max residual {worst:.2e} over 20 field pairs; {elapsed:.2} s"),
    ))
}

fn velocity_path_equivalence() -> Result<Verdict> {
    let s = 0.75;
    let grid = GridSpec::new(4.0, 256)?;
    let c = grid.center();
    let theta = SpectralField::from_fn(grid, |x| (-(x - c).norm_sq() / 0.09).exp()).dealiased();
    let h = grid.spacing();
    let eps: Vec<f64> = (0..5).map(|i| 32.0 * h / 2f64.powi(i)).collect();
    let gaps = eps
        .iter()
        .map(|&e| velocity_path_gap(&theta, &KernelParams::new(s, e)?, 1e-3))
        .collect::<gsqg::Result<Vec<_>>>()?;
    let fit = fit_log_log(&eps, &gaps).ok_or_else(|| CliError::Numerical("degenerate gap ladder".into()))?;
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let gate = (2.0 * s - 1.0) - 0.3;
    Ok(Verdict::gate(
        decreasing && fit.slope >= gate,
        format!(
            "gaps {:?}; fitted slope {:.3} (gate >= {gate:.2}), R^2 {:.3}",
            gaps.iter().map(|g| format!("{g:.2e}")).collect::<Vec<_>>(),
            fit.slope,
            fit.r_squared
        ),
    ))
}

/// Plateau patch of height 1 and radius 0.5 about the box centre plus an
/// off-centre blob (plus an optional perturbation), on `[0, 4)²`.
fn plateau_datum(grid: GridSpec, eta: f64) -> SpectralField {
    let z0 = grid.center();
    let blob = Vec2::new(1.0, 1.9);
    let bump = Vec2::new(1.1, 2.0);
    SpectralField::from_fn(grid, |x| {
        let r = (x - z0).norm();
        0.5 * libm::erfc((r - 0.5) / (1.0 / 16.0))
            + 2.0 * (-(x - blob).norm_sq() / 0.04).exp()
            + eta * (-(x - bump).norm_sq() / 0.04).exp()
    })
    .dealiased()
}

fn plateau_config(grid: GridSpec, theta: &SpectralField) -> SimConfig {
    let mut cfg = SimConfig::new(grid, 0.75, 0.25);
    cfg.t_end = 0.5;
    cfg.diag_every = 5;
    cfg.tol_plateau = Some(1e-3 * lp_norm(theta, f64::INFINITY));
    cfg
}

fn plateau_persistence() -> Result<Verdict> {
    let grid = GridSpec::new(4.0, 256)?;
    let theta = plateau_datum(grid, 0.0);
    let cfg = plateau_config(grid, &theta);
    let ens = VortexEnsemble::new(vec![grid.center()], vec![0.2], vec![1.0])?;
    let (records, _, termination) = collect_records(&cfg, &theta, ens)?;
    let audit = radius_lower_bound_audit(&records, 0)?;
    let r0 = audit.radius[0];
    let (lemma, osgood) = (audit.min_lemma_margin(), audit.min_osgood_margin());
    let t_final = records.last().map_or(0.0, |r| r.t);
    let floor = -1e-3 * r0;
    Ok(Verdict::gate(
        termination.label() == "completed" && (t_final - 0.5).abs() < 1e-12 && lemma >= floor && osgood >= floor,
        format!(
            "R0 = {r0:.5}, R(0.5) = {:.5}; min margin lemma {lemma:.3e}, Osgood {osgood:.3e} (floor {floor:.1e}); final bounds lemma {:.5}, Osgood {:.5}",
            audit.radius.last().copied().unwrap_or(f64::NAN),
            audit.lemma_bound.last().copied().unwrap_or(f64::NAN),
            audit.osgood_bound.last().copied().unwrap_or(f64::NAN)
        ),
    ))
}

fn blowup_functional_cases() -> Result<Verdict> {
    let mut worst_closed = 0.0f64;
    let z = Vec2::new(0.3, -0.2);
    for r in [0.1, 0.5, 0.9, 1.5] {
        let constant = blowup_functional_fn(|_| Vec2::new(1.3, -0.7), z, r, 256)?;
        let rotation = blowup_functional_fn(|x| (x - z).perp() * 2.5, z, r, 256)?;
        let lambda = 0.8;
        let dilation = blowup_functional_fn(|x| (x - z) * -lambda, z, r, 256)?;
        worst_closed = worst_closed
            .max(constant.abs())
            .max(rotation.abs())
            .max((dilation - lambda / (1.0 - r.ln())).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut violations = 0;
    for _ in 0..100 {
        let modes: Vec<(Vec2, Vec2, f64)> = (0..4)
            .map(|_| {
                (
                    Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)),
                    Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    rng.gen_range(0.0..2.0 * PI),
                )
            })
            .collect();
        let v = move |x: Vec2| {
            modes
                .iter()
                .fold(Vec2::ZERO, |acc, (k, a, ph)| acc + *a * (k.dot(x) + ph).sin())
        };
        let z = Vec2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let r = rng.gen_range(0.05..0.9);
        let pairs: Vec<(Vec2, Vec2)> = (0..200)
            .map(|_| {
                let x = z + Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let y = x + Vec2::new(rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6));
                (x, y)
            })
            .collect();
        if !log_lipschitz_bound_check(v, z, r, 128, &pairs)?.holds {
            violations += 1;
        }
    }
    Ok(Verdict::gate(
        worst_closed < 1e-10 && violations == 0,
        format!("closed-form error {worst_closed:.2e}; domination violated on {violations} of 100 fields"),
    ))
}

fn stability() -> Result<Verdict> {
    let grid = GridSpec::new(4.0, 128)?;
    let run = |eta: f64| -> Result<Vec<CoupledState>> {
        let theta = plateau_datum(grid, eta);
        let mut cfg = plateau_config(grid, &theta);
        cfg.time_step = TimeStepPolicy::Fixed(0.01);
        cfg.tol_plateau = Some(2e-3);
        let ens = VortexEnsemble::new(vec![grid.center()], vec![0.2], vec![1.0])?;
        Ok(collect_records(&cfg, &theta, ens)?.1)
    };
    let ((a, a2), (b, c)) = rayon::join(
        || rayon::join(|| run(0.0), || run(0.0)),
        || rayon::join(|| run(1e-6), || run(5e-7)),
    );
    let (a, a2, b, c) = (a?, a2?, b?, c?);
    let identical = stability_gap(&a, &a2, 2.0)?.identically_zero();
    let mut ok = identical;
    let mut details = vec![format!("identical pair gap == 0: {identical}")];
    for ell in [2.0, 0.0] {
        let full = stability_gap(&a, &b, ell)?;
        let half = stability_gap(&a, &c, ell)?;
        let fit = full.fit;
        let ratio_err = full
            .gap
            .iter()
            .zip(&half.gap)
            .map(|(g1, g2)| (g1 / g2 / 2.0 - 1.0).abs())
            .fold(0.0, f64::max);
        let fit_ok = fit.is_some_and(|f| f.slope.is_finite() && f.r_squared >= 0.9);
        ok &= fit_ok && ratio_err <= 0.1;
        details.push(match fit {
            Some(f) => format!(
                "l={ell}: rate {:.3}, R^2 {:.3}, linear-scaling deviation {ratio_err:.1e}",
                f.slope, f.r_squared
            ),
            None => format!("l={ell}: no fit"),
        });
    }
    Ok(Verdict::gate(ok, details.join("; ")))
}

fn spectral_infrastructure() -> Result<Verdict> {
    let grid = GridSpec::new(2.0 * PI, 64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let kmax = grid.dealias_kmax();
    let top = top_block_index(&grid);
    // Cauchy-Schwarz bound ‖g‖_∞ ≤ √(#modes)·‖g‖_{L²}/L for a block of the
    // (2, ∞) Bernstein ratio
    let ones = SpectralField::from_coefficients(grid, vec![Complex64::new(1.0, 0.0); grid.len()])?.dealiased();
    let cs_bound = (0..=top)
        .map(|j| {
            let count = inhomogeneous_block(&ones, j).coeffs().iter().filter(|c| c.norm() > 0.0).count();
            (count as f64).sqrt() / (grid.side_length() * 2f64.powi(j))
        })
        .fold(0.0, f64::max);
    let mut lp_err = 0.0f64;
    let mut div_err = 0.0f64;
    let mut sup_by_j = vec![f64::NAN; (top + 1) as usize];
    for i in 0..100 {
        let f = random_field(grid, &mut rng, kmax);
        let back = dyadic_decompose(&f).reconstruct();
        lp_err = lp_err.max(lp_norm(&back.sub(&f)?, f64::INFINITY) / lp_norm(&f, f64::INFINITY));
        for j in 0..=top {
            if let BernsteinReport::Ratio(r) = bernstein_check(&f, j, 2.0, f64::INFINITY)? {
                let slot = &mut sup_by_j[j as usize];
                *slot = if slot.is_nan() { r } else { slot.max(r) };
            }
        }
        if i % 10 == 0 {
            let v = biot_savart(&f, 0.1 + 0.08 * (i / 10) as f64)?;
            let scale = v.max_magnitude().max(1.0);
            let worst = v.divergence().coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
            div_err = div_err.max(worst / scale);
        }
    }
    let occupied: Vec<f64> = sup_by_j.iter().copied().filter(|r| !r.is_nan()).collect();
    let max_ratio = occupied.iter().copied().fold(0.0, f64::max);
    // j-stability: the ratio never grows by more than 2x towards higher blocks
    let growth = occupied
        .iter()
        .enumerate()
        .flat_map(|(i, lo)| occupied[i + 1..].iter().map(move |hi| hi / lo))
        .fold(0.0, f64::max);
    Ok(Verdict::gate(
        lp_err < 1e-12 && occupied.len() >= 3 && max_ratio <= cs_bound && growth <= 2.0 && div_err < 1e-13,
        format!(
            "LP reconstruction {lp_err:.1e}; Bernstein (2,inf) sup ratio per block {:?} (uniform bound {cs_bound:.3}, max growth in j {growth:.2}); divergence {div_err:.1e}",
            occupied.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        ),
    ))
}

/// Small coupled configuration exercised by the determinism check.
pub const DETERMINISM_CONFIG: &str = r#"
s = 0.75
t_end = 0.1
diag_every = 2
tol_plateau = 2e-3

[grid]
side_length = 4.0
n = 64

[[theta]]
kind = "plateau-patch"
center = [2.0, 2.0]
beta = 1.0
radius = 0.8
width = 0.25

[[theta]]
kind = "gaussian-blob"
center = [1.0, 1.9]
width = 0.25
amplitude = 2.0

[vortices]
positions = [[2.0, 2.0]]
intensities = [0.2]
"#;

fn determinism() -> Result<Verdict> {
    let setup = setup_from_str(DETERMINISM_CONFIG, 0, std::path::Path::new("."))?;
    let dir_a = tempfile::tempdir().map_err(|e| CliError::io(std::path::Path::new("tempdir"), e))?;
    let dir_b = tempfile::tempdir().map_err(|e| CliError::io(std::path::Path::new("tempdir"), e))?;
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let wide = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    single.install(|| run_simulate(&setup, dir_a.path()))?;
    wide.install(|| run_simulate(&setup, dir_b.path()))?;
    let read = |d: &std::path::Path| {
        let p = d.join(DIAGNOSTICS_CSV);
        std::fs::read(&p).map_err(|e| CliError::io(&p, e))
    };
    let (a, b) = (read(dir_a.path())?, read(dir_b.path())?);
    let rows = a.iter().filter(|c| **c == b'\n').count().saturating_sub(1);
    Ok(Verdict::gate(
        a == b && rows > 1,
        format!(
            "{} bytes, {rows} samples; 1-thread vs 4-thread runs {}",
            a.len(),
            if a == b { "byte-identical" } else { "differ" }
        ),
    ))
}
