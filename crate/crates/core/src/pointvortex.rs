//! The generalized N-point-vortex system
//!
//! ```text
//! dz_i/dt = c_s Σ_{j≠i} a_j (z_i − z_j)⊥ / |z_i − z_j|^{4−2s}
//! ```
//!
//! with its invariants `H = Σ_{i≠j} a_i a_j |z_i − z_j|^{2s−2}` (ordered
//! pairs, so each unordered pair counts twice) and `I = Σ a_i |z_i|²`.

use crate::kernels::c_s_constant;
use crate::{Error, Result, Vec2};

/// Point vortices: positions `z_i`, intensities `a_i` and the plateau values
/// `β_i` the scalar is expected to take around each of them.
#[derive(Debug, Clone, PartialEq)]
pub struct VortexEnsemble {
    positions: Vec<Vec2>,
    intensities: Vec<f64>,
    plateau_values: Vec<f64>,
}

impl VortexEnsemble {
    pub fn new(positions: Vec<Vec2>, intensities: Vec<f64>, plateau_values: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Invalid("an ensemble needs at least one vortex".into()));
        }
        if intensities.len() != positions.len() || plateau_values.len() != positions.len() {
            return Err(Error::Invalid(format!(
                "ensemble arrays disagree: {} positions, {} intensities, {} plateau values",
                positions.len(),
                intensities.len(),
                plateau_values.len()
            )));
        }
        if let Some(index) = intensities.iter().position(|&a| a == 0.0 || !a.is_finite()) {
            return Err(Error::ZeroIntensity { index });
        }
        let ens = Self {
            positions,
            intensities,
            plateau_values,
        };
        ens.check_nonsingular()?;
        Ok(ens)
    }

    /// Ensemble with all plateau values set to zero.
    pub fn with_intensities(positions: Vec<Vec2>, intensities: Vec<f64>) -> Result<Self> {
        let betas = vec![0.0; positions.len()];
        Self::new(positions, intensities, betas)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn plateau_values(&self) -> &[f64] {
        &self.plateau_values
    }

    /// Same intensities and plateau values at new positions (validated).
    pub fn with_positions(&self, positions: Vec<Vec2>) -> Result<Self> {
        if positions.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: positions.len(),
            });
        }
        let ens = Self {
            positions,
            intensities: self.intensities.clone(),
            plateau_values: self.plateau_values.clone(),
        };
        ens.check_nonsingular()?;
        Ok(ens)
    }

    fn check_nonsingular(&self) -> Result<()> {
        for (i, zi) in self.positions.iter().enumerate() {
            if !zi.is_finite() {
                return Err(Error::Invalid(format!("vortex {i} has a non-finite position")));
            }
            for (j, zj) in self.positions.iter().enumerate().skip(i + 1) {
                if (*zi - *zj).norm_sq() == 0.0 {
                    return Err(Error::SingularConfiguration { i, j });
                }
            }
        }
        Ok(())
    }
}

/// Velocity induced on `target` by the vortices, skipping index `skip`.
pub(crate) fn induced_velocity(
    positions: &[Vec2],
    intensities: &[f64],
    target: Vec2,
    skip: Option<usize>,
    s: f64,
    c_s: f64,
) -> Vec2 {
    let mut acc = Vec2::ZERO;
    for (j, (zj, aj)) in positions.iter().zip(intensities).enumerate() {
        if Some(j) == skip {
            continue;
        }
        let d = target - *zj;
        let r2 = d.norm_sq();
        acc += d.perp() * (aj / r2.powf(2.0 - s));
    }
    acc * c_s
}

fn rhs_positions(positions: &[Vec2], intensities: &[f64], s: f64, c_s: f64) -> Result<Vec<Vec2>> {
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            if (positions[i] - positions[j]).norm_sq() == 0.0 {
                return Err(Error::SingularConfiguration { i, j });
            }
        }
    }
    Ok(positions
        .iter()
        .enumerate()
        .map(|(i, &zi)| induced_velocity(positions, intensities, zi, Some(i), s, c_s))
        .collect())
}

/// Velocities of all vortices; a vortex does not advect itself.
pub fn vortex_rhs(ens: &VortexEnsemble, s: f64) -> Result<Vec<Vec2>> {
    let c_s = c_s_constant(s)?;
    rhs_positions(&ens.positions, &ens.intensities, s, c_s)
}

/// `H = Σ_{i≠j} a_i a_j / |z_i − z_j|^{2−2s}` over ordered pairs.
pub fn hamiltonian(ens: &VortexEnsemble, s: f64) -> Result<f64> {
    c_s_constant(s)?;
    let mut h = 0.0;
    for i in 0..ens.len() {
        for j in 0..ens.len() {
            if i == j {
                continue;
            }
            let r2 = (ens.positions[i] - ens.positions[j]).norm_sq();
            if r2 == 0.0 {
                return Err(Error::SingularConfiguration { i: i.min(j), j: i.max(j) });
            }
            h += ens.intensities[i] * ens.intensities[j] / r2.powf(1.0 - s);
        }
    }
    Ok(h)
}

/// `I = Σ a_i |z_i|²`.
pub fn moment_of_inertia(ens: &VortexEnsemble) -> f64 {
    ens.positions
        .iter()
        .zip(&ens.intensities)
        .map(|(z, a)| a * z.norm_sq())
        .sum()
}

/// Smallest pairwise distance; `+∞` for a single vortex.
pub fn min_pairwise_distance(ens: &VortexEnsemble) -> f64 {
    min_distance(&ens.positions)
}

pub(crate) fn min_distance(positions: &[Vec2]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            best = best.min((positions[i] - positions[j]).norm());
        }
    }
    best
}

/// Time integration scheme for the vortex ODE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    /// Classical fixed-step fourth-order Runge-Kutta.
    Rk4,
    /// Dormand-Prince 5(4) with local error control.
    AdaptiveRk45 { tol: f64 },
}

impl Integrator {
    pub const DEFAULT_TOL: f64 = 1e-10;
}

/// Relative guard below which a step is refused as a near-collapse.
pub const COLLAPSE_GUARD: f64 = 1e-6;
const MAX_REJECTIONS: usize = 50;

fn axpy(y: &[Vec2], k: &[(f64, &[Vec2])]) -> Vec<Vec2> {
    y.iter()
        .enumerate()
        .map(|(i, &yi)| {
            let mut acc = yi;
            for (c, ks) in k {
                acc += ks[i] * *c;
            }
            acc
        })
        .collect()
}

fn rk4_positions(y: &[Vec2], a: &[f64], s: f64, c_s: f64, dt: f64) -> Result<Vec<Vec2>> {
    let k1 = rhs_positions(y, a, s, c_s)?;
    let k2 = rhs_positions(&axpy(y, &[(0.5 * dt, &k1)]), a, s, c_s)?;
    let k3 = rhs_positions(&axpy(y, &[(0.5 * dt, &k2)]), a, s, c_s)?;
    let k4 = rhs_positions(&axpy(y, &[(dt, &k3)]), a, s, c_s)?;
    Ok(axpy(
        y,
        &[(dt / 6.0, &k1), (dt / 3.0, &k2), (dt / 3.0, &k3), (dt / 6.0, &k4)],
    ))
}

// Dormand-Prince 5(4) tableau.
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince trial step: (5th-order solution, error estimate).
fn dopri_trial(y: &[Vec2], a: &[f64], s: f64, c_s: f64, h: f64) -> Result<(Vec<Vec2>, f64)> {
    let mut ks: Vec<Vec<Vec2>> = Vec::with_capacity(7);
    for stage in 0..7 {
        let terms: Vec<(f64, &[Vec2])> = (0..stage)
            .map(|m| (h * DP_A[stage][m], ks[m].as_slice()))
            .collect();
        let ys = axpy(y, &terms);
        ks.push(rhs_positions(&ys, a, s, c_s)?);
    }
    let high: Vec<(f64, &[Vec2])> = (0..7).map(|m| (h * DP_B5[m], ks[m].as_slice())).collect();
    let y5 = axpy(y, &high);
    let mut err: f64 = 0.0;
    for i in 0..y.len() {
        let mut e = Vec2::ZERO;
        for m in 0..7 {
            e += ks[m][i] * (h * (DP_B5[m] - DP_B4[m]));
        }
        let scale = 1.0 + y[i].norm().max(y5[i].norm());
        err = err.max(e.norm() / scale);
    }
    Ok((y5, err))
}

/// Adaptive integration over `[0, dt]` with relative-to-`(1+|z|)` local
/// error below `tol`; steps that bring two vortices closer than `d_min`
/// are refused and retried with a smaller step.
fn adaptive_interval(
    y0: &[Vec2],
    a: &[f64],
    s: f64,
    c_s: f64,
    dt: f64,
    tol: f64,
    d_min: f64,
) -> Result<Vec<Vec2>> {
    let mut y = y0.to_vec();
    let mut t = 0.0;
    let mut h = dt;
    let mut rejections = 0usize;
    while t < dt {
        let h_try = h.min(dt - t);
        let accepted = match dopri_trial(&y, a, s, c_s, h_try) {
            Ok((y_new, err)) => {
                let finite = y_new.iter().all(|z| z.is_finite());
                let dist_ok = min_distance(&y_new) >= d_min;
                let factor = if err == 0.0 { 5.0 } else { (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0) };
                if finite && err <= tol && dist_ok {
                    y = y_new;
                    t += h_try;
                    h = h_try * factor;
                    true
                } else {
                    h = h_try * if finite && dist_ok { factor.min(0.9) } else { 0.25 };
                    false
                }
            }
            Err(_) => {
                h = h_try * 0.25;
                false
            }
        };
        if accepted {
            rejections = 0;
        } else {
            rejections += 1;
            if rejections > MAX_REJECTIONS {
                return Err(Error::NearCollapse {
                    min_distance: min_distance(&y),
                });
            }
        }
    }
    Ok(y)
}

/// Advances the ensemble by `dt`.
///
/// The adaptive scheme refuses configurations closer than
/// [`COLLAPSE_GUARD`] times the input's minimum pairwise distance.
pub fn step(ens: &VortexEnsemble, s: f64, dt: f64, method: Integrator) -> Result<VortexEnsemble> {
    let d0 = min_pairwise_distance(ens);
    step_guarded(ens, s, dt, method, COLLAPSE_GUARD * d0)
}

fn step_guarded(ens: &VortexEnsemble, s: f64, dt: f64, method: Integrator, d_min: f64) -> Result<VortexEnsemble> {
    if !(dt > 0.0) {
        return Err(Error::OutOfRange {
            name: "dt",
            value: dt,
            expected: "dt > 0",
        });
    }
    let c_s = c_s_constant(s)?;
    let positions = match method {
        Integrator::Rk4 => {
            let y = rk4_positions(&ens.positions, &ens.intensities, s, c_s, dt)?;
            let d = min_distance(&y);
            if d < d_min {
                return Err(Error::NearCollapse { min_distance: d });
            }
            y
        }
        Integrator::AdaptiveRk45 { tol } => {
            adaptive_interval(&ens.positions, &ens.intensities, s, c_s, dt, tol, d_min)?
        }
    };
    ens.with_positions(positions)
}

/// A sampled vortex trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<VortexEnsemble>,
}

/// Integrates to `t_end` with output every `dt`; the collapse guard is
/// relative to the initial minimum distance.
pub fn integrate(ens: &VortexEnsemble, s: f64, t_end: f64, dt: f64, method: Integrator) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Invalid(format!("bad time grid: t_end = {t_end}, dt = {dt}")));
    }
    let d_min = COLLAPSE_GUARD * min_pairwise_distance(ens);
    let steps = (t_end / dt).round() as usize;
    let mut times = vec![0.0];
    let mut states = vec![ens.clone()];
    let mut current = ens.clone();
    for k in 1..=steps {
        current = step_guarded(&current, s, dt, method, d_min)?;
        times.push(k as f64 * dt);
        states.push(current.clone());
    }
    Ok(Trajectory { times, states })
}

/// Worst relative drift of `H` and `I` along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservationDrift {
    pub hamiltonian: f64,
    pub moment: f64,
}

fn relative_drift(values: &[f64]) -> f64 {
    let v0 = values[0];
    let worst = values.iter().map(|v| (v - v0).abs()).fold(0.0, f64::max);
    if v0 == 0.0 {
        worst
    } else {
        worst / v0.abs()
    }
}

pub fn conservation_audit(traj: &Trajectory, s: f64) -> Result<ConservationDrift> {
    if traj.states.len() < 2 {
        return Err(Error::Invalid("conservation audit needs at least two samples".into()));
    }
    let h: Vec<f64> = traj.states.iter().map(|e| hamiltonian(e, s)).collect::<Result<_>>()?;
    let i: Vec<f64> = traj.states.iter().map(moment_of_inertia).collect();
    Ok(ConservationDrift {
        hamiltonian: relative_drift(&h),
        moment: relative_drift(&i),
    })
}
