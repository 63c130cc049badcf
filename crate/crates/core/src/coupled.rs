//! The regularized vortex-wave stepper.
//!
//! Evolves `(θ, z_1..z_N)` under
//!
//! ```text
//! ∂_t θ + E_N div((v + Σ a_i H_i) θ) = 0,
//! dz_i/dt = v(z_i) + c_s Σ_{j≠i} a_j (z_i − z_j)⊥ / |z_i − z_j|^{4−2s},
//! ```
//!
//! where `v` is the gSQG velocity of `E_N θ` and `H_i(x) = K_{s,ε}(x − z_i)`.
//! The flux is formed in physical space and differentiated spectrally; the
//! joint state is advanced with one RK4 tableau.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::diagnostics::{DiagnosticsRecord, Sampler};
use crate::kernels::{eval_k_s_eps, rasterize, KernelConvolver, KernelParams};
use crate::pointvortex::{induced_velocity, min_distance, VortexEnsemble};
use crate::profile::bump;
use crate::spectral::{
    biot_savart, low_pass, spectral_cutoff, GridSpec, PointEvaluator, SpectralField, VectorField,
};
use crate::{Error, Result, Vec2};

/// How the smooth velocity `v` is obtained from `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocityPath {
    /// Exact Fourier multiplier `−∇⊥(−Δ)^{−s}`.
    Multiplier,
    /// FFT convolution with the rasterized `K_{s,ε}`.
    KernelConvolution,
}

/// How the smooth velocity is sampled at a vortex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VortexCoupling {
    /// Point value `v(z_i)` by exact Fourier summation.
    Dirac,
    /// Quasi point vortex: `∫ v(x) χ_δ(x − z_i) dx` with `∫ χ_δ = 1` on the grid.
    Mollified { width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStepPolicy {
    /// Constant step; the run errors out if the Courant number exceeds
    /// [`SimConfig::max_courant`].
    Fixed(f64),
    /// `dt = factor · h / max|v + Σ a_i H_i|`, recomputed every step.
    Cfl(f64),
}

/// Full configuration of a coupled run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: GridSpec,
    pub s: f64,
    pub eps: f64,
    /// Galerkin cutoff `N`; `None` keeps every grid mode.
    pub galerkin_n: Option<f64>,
    pub time_step: TimeStepPolicy,
    pub max_courant: f64,
    pub t_end: f64,
    pub coupling: VortexCoupling,
    pub velocity_path: VelocityPath,
    pub diag_every: usize,
    /// Absolute plateau tolerance; `None` means `1e-6 · ‖θ₀‖_∞`.
    pub tol_plateau: Option<f64>,
    pub tol_ode: f64,
    /// Sobolev order `k` used in the monitored energy `‖θ‖²_{H^k} + 1/R`.
    pub energy_order: f64,
    /// Circle samples for the blow-up functional (doubled once internally).
    pub circle_samples: usize,
    /// Terminate when a plateau radius falls below two grid spacings.
    pub plateau_guard: bool,
}

impl SimConfig {
    pub const DEFAULT_CFL: f64 = 0.5;

    pub fn new(grid: GridSpec, s: f64, eps: f64) -> Self {
        Self {
            grid,
            s,
            eps,
            galerkin_n: None,
            time_step: TimeStepPolicy::Cfl(Self::DEFAULT_CFL),
            max_courant: 1.0,
            t_end: 1.0,
            coupling: VortexCoupling::Dirac,
            velocity_path: VelocityPath::Multiplier,
            diag_every: 10,
            tol_plateau: None,
            tol_ode: 1e-10,
            energy_order: 4.0,
            circle_samples: 256,
            plateau_guard: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.grid.spacing();
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::OutOfRange {
                name: "s",
                value: self.s,
                expected: "0 < s < 1",
            });
        }
        if !(self.eps >= 2.0 * h) {
            return Err(Error::Invalid(format!(
                "kernel unresolvable: eps = {} is below two grid spacings (2h = {})",
                self.eps,
                2.0 * h
            )));
        }
        if let Some(n) = self.galerkin_n {
            if !(n > 0.0) {
                return Err(Error::OutOfRange {
                    name: "galerkin_n",
                    value: n,
                    expected: "N > 0",
                });
            }
        }
        match self.time_step {
            TimeStepPolicy::Fixed(dt) if !(dt > 0.0) => {
                return Err(Error::OutOfRange {
                    name: "dt",
                    value: dt,
                    expected: "dt > 0",
                })
            }
            TimeStepPolicy::Cfl(c) if !(c > 0.0 && c <= 1.0) => {
                return Err(Error::OutOfRange {
                    name: "cfl",
                    value: c,
                    expected: "0 < cfl ≤ 1",
                })
            }
            _ => {}
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::OutOfRange {
                name: "t_end",
                value: self.t_end,
                expected: "t_end ≥ 0",
            });
        }
        if let VortexCoupling::Mollified { width } = self.coupling {
            if !(width >= h) {
                return Err(Error::Invalid(format!(
                    "mollifier width {width} is below the grid spacing {h}"
                )));
            }
        }
        if self.diag_every == 0 {
            return Err(Error::Invalid("diag_every must be at least 1".into()));
        }
        if self.circle_samples < 8 {
            return Err(Error::Invalid("circle_samples must be at least 8".into()));
        }
        Ok(())
    }

    pub fn kernel_params(&self) -> Result<KernelParams> {
        KernelParams::new(self.s, self.eps)
    }
}

/// `(θ, z)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub t: f64,
    pub theta: SpectralField,
    pub vortices: VortexEnsemble,
}

/// Time derivative of a [`CoupledState`].
#[derive(Debug, Clone)]
pub struct StateRate {
    pub theta: SpectralField,
    pub positions: Vec<Vec2>,
    /// Grid maximum of `|v + Σ a_i H_i|` at the evaluation point.
    pub max_speed: f64,
}

/// `θ_{0,ε} = χ_{1/ε} · S_{j_ε} θ₀` with `j_ε = ⌈1/ε⌉`.
///
/// The physical cutoff is centred on the box centre; its scale `1/ε` is
/// capped at `L/4`. The result is dealiased.
pub fn regularize_initial_datum(theta0: &SpectralField, eps: f64) -> Result<SpectralField> {
    if !(eps > 0.0) {
        return Err(Error::OutOfRange {
            name: "eps",
            value: eps,
            expected: "ε > 0",
        });
    }
    let grid = *theta0.grid();
    let j_eps = (1.0 / eps).ceil().min(i32::MAX as f64 / 2.0) as i32;
    let smoothed = low_pass(theta0, j_eps.min(1000));
    let scale = (1.0 / eps).min(grid.side_length() / 4.0);
    let center = grid.center();
    let n = grid.n();
    let mut values = smoothed.to_physical();
    values.par_iter_mut().enumerate().for_each(|(idx, v)| {
        let d = grid.node(idx % n, idx / n) - center;
        *v *= bump(d.norm() / scale);
    });
    Ok(SpectralField::from_physical(&values, grid)?.dealiased())
}

/// Weighted average `Σ f(x) χ_δ(x − z) / Σ χ_δ(x − z)` over grid nodes.
pub fn mollified_average(values: &[f64], grid: &GridSpec, z: Vec2, width: f64) -> f64 {
    let n = grid.n();
    let h = grid.spacing();
    let reach = (width / h).ceil() as i64 + 1;
    let cx = (z.x / h).round() as i64;
    let cy = (z.y / h).round() as i64;
    let (mut num, mut den) = (0.0, 0.0);
    for oy in -reach..=reach {
        for ox in -reach..=reach {
            let ix = (cx + ox).rem_euclid(n as i64) as usize;
            let iy = (cy + oy).rem_euclid(n as i64) as usize;
            let d = grid.nearest_image(grid.node(ix, iy) - z);
            let w = bump(d.norm() / width);
            if w > 0.0 {
                num += w * values[iy * n + ix];
                den += w;
            }
        }
    }
    num / den
}

/// Right-hand side evaluator and RK4 stepper for one configuration.
pub struct VortexWaveSolver {
    cfg: SimConfig,
    params: KernelParams,
    c_s: f64,
    convolver: Option<KernelConvolver>,
}

impl VortexWaveSolver {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let params = cfg.kernel_params()?;
        let convolver = match cfg.velocity_path {
            VelocityPath::Multiplier => None,
            VelocityPath::KernelConvolution => Some(KernelConvolver::new(&cfg.grid, &params)?),
        };
        Ok(Self {
            c_s: params.c_s(),
            params,
            cfg,
            convolver,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    fn project(&self, f: &SpectralField) -> Result<SpectralField> {
        match self.cfg.galerkin_n {
            Some(n) => spectral_cutoff(f, n),
            None => Ok(f.clone()),
        }
    }

    /// The smooth velocity `v` of `E_N θ`.
    pub fn velocity(&self, theta: &SpectralField) -> Result<VectorField> {
        let theta_n = self.project(theta)?;
        let mut v = match &self.convolver {
            None => biot_savart(&theta_n, self.cfg.s)?,
            Some(conv) => conv.apply(&theta_n)?,
        };
        v.dealias();
        Ok(v)
    }

    /// `Σ a_i K_{s,ε}(x − z_i)` rasterized, Leray-projected and dealiased,
    /// so the advecting field is band-limited and exactly divergence-free.
    pub fn vortex_field(&self, vortices: &VortexEnsemble) -> Result<VectorField> {
        let grid = self.cfg.grid;
        let mut hx = vec![0.0; grid.len()];
        let mut hy = vec![0.0; grid.len()];
        for (z, a) in vortices.positions().iter().zip(vortices.intensities()) {
            let (kx, ky) = rasterize(&grid, *z, |d| eval_k_s_eps(d, &self.params));
            for i in 0..grid.len() {
                hx[i] += a * kx[i];
                hy[i] += a * ky[i];
            }
        }
        let field = VectorField {
            x: SpectralField::from_physical(&hx, grid)?,
            y: SpectralField::from_physical(&hy, grid)?,
        };
        let mut projected = field.leray_project();
        projected.dealias();
        Ok(projected)
    }

    fn check_safe_region(&self, vortices: &VortexEnsemble) -> Result<()> {
        let l = self.cfg.grid.side_length();
        let margin = l / 8.0;
        for (index, z) in vortices.positions().iter().enumerate() {
            let inside = |c: f64| c >= margin && c <= l - margin;
            if !(inside(z.x) && inside(z.y)) {
                return Err(Error::OutsideSafeRegion {
                    index,
                    x: z.x,
                    y: z.y,
                });
            }
        }
        Ok(())
    }

    /// Smooth velocity sampled at each vortex per the coupling mode.
    fn sample_velocity(&self, v: &VectorField, positions: &[Vec2]) -> Vec<Vec2> {
        match self.cfg.coupling {
            VortexCoupling::Dirac => positions
                .iter()
                .map(|&z| {
                    let ev = PointEvaluator::new(&self.cfg.grid, z);
                    Vec2::new(ev.eval(&v.x), ev.eval(&v.y))
                })
                .collect(),
            VortexCoupling::Mollified { width } => {
                let (vx, vy) = v.to_physical();
                positions
                    .iter()
                    .map(|&z| {
                        Vec2::new(
                            mollified_average(&vx, &self.cfg.grid, z, width),
                            mollified_average(&vy, &self.cfg.grid, z, width),
                        )
                    })
                    .collect()
            }
        }
    }

    /// Vortex velocities: sampled smooth velocity plus the mutual
    /// point-vortex interaction (no self-interaction).
    pub fn vortex_velocity(&self, state: &CoupledState) -> Result<Vec<Vec2>> {
        self.check_safe_region(&state.vortices)?;
        let v = self.velocity(&state.theta)?;
        Ok(self.vortex_velocity_from(&v, &state.vortices))
    }

    fn vortex_velocity_from(&self, v: &VectorField, vortices: &VortexEnsemble) -> Vec<Vec2> {
        let positions = vortices.positions();
        let sampled = self.sample_velocity(v, positions);
        sampled
            .into_iter()
            .enumerate()
            .map(|(i, vi)| {
                vi + induced_velocity(positions, vortices.intensities(), positions[i], Some(i), self.cfg.s, self.c_s)
            })
            .collect()
    }

    /// `(dθ/dt, dz/dt)` with `dθ/dt = −E_N div((v + Σ a_i H_i) θ)`.
    pub fn rhs(&self, state: &CoupledState) -> Result<StateRate> {
        self.check_safe_region(&state.vortices)?;
        let grid = self.cfg.grid;
        let v = self.velocity(&state.theta)?;
        let h = self.vortex_field(&state.vortices)?;
        let u = v.add(&h)?;
        let (ux, uy) = u.to_physical();
        let th = state.theta.to_physical();
        let max_speed = ux.iter().zip(&uy).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max);
        let fx: Vec<f64> = ux.iter().zip(&th).map(|(a, b)| a * b).collect();
        let fy: Vec<f64> = uy.iter().zip(&th).map(|(a, b)| a * b).collect();
        let flux = VectorField {
            x: SpectralField::from_physical(&fx, grid)?,
            y: SpectralField::from_physical(&fy, grid)?,
        };
        let mut dtheta = flux.divergence().scaled(-1.0);
        dtheta.dealias();
        let dtheta = self.project(&dtheta)?;
        let positions = self.vortex_velocity_from(&v, &state.vortices);
        Ok(StateRate {
            theta: dtheta,
            positions,
            max_speed,
        })
    }

    fn stage(&self, base: &CoupledState, rate: &StateRate, factor: f64) -> Result<CoupledState> {
        let theta = base.theta.add_scaled(&rate.theta, factor)?;
        let positions = base
            .vortices
            .positions()
            .iter()
            .zip(&rate.positions)
            .map(|(z, dz)| *z + *dz * factor)
            .collect();
        Ok(CoupledState {
            t: base.t + factor,
            theta,
            vortices: base.vortices.with_positions(positions)?,
        })
    }

    /// Classical RK4 on the joint state. Returns the new state together with
    /// the first-stage rate (whose `max_speed` sets the CFL step).
    pub fn advance_with(&self, state: &CoupledState, dt: f64, k1: StateRate) -> Result<CoupledState> {
        let k2 = self.rhs(&self.stage(state, &k1, 0.5 * dt)?)?;
        let k3 = self.rhs(&self.stage(state, &k2, 0.5 * dt)?)?;
        let k4 = self.rhs(&self.stage(state, &k3, dt)?)?;
        let n = state.theta.coeffs().len();
        let mut coeffs = state.theta.coeffs().to_vec();
        let (c1, c2, c3, c4) = (
            k1.theta.coeffs(),
            k2.theta.coeffs(),
            k3.theta.coeffs(),
            k4.theta.coeffs(),
        );
        let w = dt / 6.0;
        for i in 0..n {
            coeffs[i] += (c1[i] + (c2[i] + c3[i]) * 2.0 + c4[i]) * w;
        }
        let mut theta = SpectralField::from_coefficients(self.cfg.grid, coeffs)?;
        theta.dealias();
        let positions: Vec<Vec2> = state
            .vortices
            .positions()
            .iter()
            .enumerate()
            .map(|(i, z)| {
                *z + (k1.positions[i] + (k2.positions[i] + k3.positions[i]) * 2.0 + k4.positions[i]) * w
            })
            .collect();
        let t = state.t + dt;
        let finite = theta.coeffs().iter().all(|c| c.re.is_finite() && c.im.is_finite())
            && positions.iter().all(|z| z.is_finite());
        if !finite {
            return Err(Error::NumericalBlowup { t });
        }
        Ok(CoupledState {
            t,
            theta,
            vortices: state.vortices.with_positions(positions)?,
        })
    }

    /// One RK4 step of size `dt`.
    pub fn advance(&self, state: &CoupledState, dt: f64) -> Result<CoupledState> {
        let k1 = self.rhs(state)?;
        self.advance_with(state, dt, k1)
    }

    /// Initial state: `E_N θ₀`, dealiased, at `t = 0`.
    pub fn initial_state(&self, theta0: &SpectralField, vortices: VortexEnsemble) -> Result<CoupledState> {
        if theta0.grid() != &self.cfg.grid {
            return Err(Error::GridMismatch);
        }
        let mut theta = self.project(theta0)?;
        theta.dealias();
        Ok(CoupledState {
            t: 0.0,
            theta,
            vortices,
        })
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    PlateauCollapse { vortex: usize, radius: f64 },
    VortexCollapse { min_distance: f64 },
    CflCollapse { dt: f64 },
    NumericalBlowup { t: f64 },
}

impl Termination {
    /// Stable identifier used in manifests.
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::PlateauCollapse { .. } => "plateau-collapse",
            Termination::VortexCollapse { .. } => "vortex-collapse",
            Termination::CflCollapse { .. } => "cfl-collapse",
            Termination::NumericalBlowup { .. } => "nan",
        }
    }
}

/// Result of [`simulate`]: the last valid state, the diagnostics stream and
/// the reason the run ended.
#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub final_state: CoupledState,
    pub records: Vec<DiagnosticsRecord>,
    pub termination: Termination,
    pub steps: usize,
}

/// Smallest CFL step accepted before declaring a CFL collapse.
const MIN_DT: f64 = 1e-10;

/// Runs to `cfg.t_end`, sampling diagnostics every `diag_every` steps and at
/// the final time.
pub fn simulate(cfg: &SimConfig, theta0: &SpectralField, vortices: VortexEnsemble) -> Result<SimulationOutcome> {
    simulate_with(cfg, theta0, vortices, |_, _| {})
}

/// [`simulate`] with a callback invoked on every diagnostic sample.
pub fn simulate_with(
    cfg: &SimConfig,
    theta0: &SpectralField,
    vortices: VortexEnsemble,
    mut on_sample: impl FnMut(&CoupledState, &DiagnosticsRecord),
) -> Result<SimulationOutcome> {
    let solver = VortexWaveSolver::new(cfg.clone())?;
    let mut state = solver.initial_state(theta0, vortices)?;
    let mut sampler = Sampler::new(cfg, &state)?;
    let h = cfg.grid.spacing();
    let d0 = min_distance(state.vortices.positions());
    let d_guard = crate::pointvortex::COLLAPSE_GUARD * d0;
    let mut records = Vec::new();
    let mut steps = 0usize;

    let first = sampler.sample(&solver, &state)?;
    on_sample(&state, &first);
    records.push(first);

    let termination = loop {
        if let Some(t) = plateau_collapse(cfg, records.last().expect("sampled"), h) {
            break t;
        }
        if cfg.t_end - state.t <= 1e-12 * cfg.t_end.max(1.0) {
            break Termination::Completed;
        }
        let k1 = match solver.rhs(&state) {
            Ok(k) => k,
            Err(Error::NumericalBlowup { t }) => break Termination::NumericalBlowup { t },
            Err(e) => return Err(e),
        };
        let remaining = cfg.t_end - state.t;
        let dt = match cfg.time_step {
            TimeStepPolicy::Fixed(dt) => {
                let courant = dt * k1.max_speed / h;
                if courant > cfg.max_courant {
                    return Err(Error::CflViolation {
                        dt,
                        limit: cfg.max_courant * h / k1.max_speed,
                    });
                }
                dt.min(remaining)
            }
            TimeStepPolicy::Cfl(factor) => {
                let dt = if k1.max_speed > 0.0 { factor * h / k1.max_speed } else { remaining };
                if dt < MIN_DT {
                    break Termination::CflCollapse { dt };
                }
                dt.min(remaining)
            }
        };
        if !k1.max_speed.is_finite() {
            break Termination::NumericalBlowup { t: state.t };
        }
        let next = match solver.advance_with(&state, dt, k1) {
            Ok(next) => next,
            Err(Error::NumericalBlowup { t }) => break Termination::NumericalBlowup { t },
            Err(Error::SingularConfiguration { .. }) => {
                break Termination::VortexCollapse { min_distance: 0.0 }
            }
            Err(e) => return Err(e),
        };
        state = next;
        steps += 1;
        let dmin = min_distance(state.vortices.positions());
        if dmin < d_guard {
            break Termination::VortexCollapse { min_distance: dmin };
        }
        let at_end = cfg.t_end - state.t <= 1e-12 * cfg.t_end.max(1.0);
        if steps.is_multiple_of(cfg.diag_every) || at_end {
            let rec = sampler.sample(&solver, &state)?;
            on_sample(&state, &rec);
            records.push(rec);
        }
    };

    Ok(SimulationOutcome {
        final_state: state,
        records,
        termination,
        steps,
    })
}

fn plateau_collapse(cfg: &SimConfig, rec: &DiagnosticsRecord, h: f64) -> Option<Termination> {
    if !cfg.plateau_guard {
        return None;
    }
    rec.plateau_radius
        .iter()
        .enumerate()
        .find(|(_, r)| **r < 2.0 * h)
        .map(|(vortex, r)| Termination::PlateauCollapse { vortex, radius: *r })
}

/// Shifts θ by an integer number of grid cells (a lattice translation).
pub fn translate_lattice(theta: &SpectralField, shift_x: i64, shift_y: i64) -> SpectralField {
    let grid = *theta.grid();
    let n = grid.n();
    // multiply by e^{−iξ·d}; phases computed from integer indices stay exact
    let coeffs: Vec<Complex64> = theta
        .coeffs()
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let kx = grid.wavenumber_index(idx % n);
            let ky = grid.wavenumber_index(idx / n);
            let turns = ((kx * shift_x + ky * shift_y).rem_euclid(n as i64)) as f64 / n as f64;
            let arg = -2.0 * std::f64::consts::PI * turns;
            c * Complex64::new(arg.cos(), arg.sin())
        })
        .collect();
    SpectralField::from_coefficients(grid, coeffs).expect("same grid")
}
