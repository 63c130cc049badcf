//! TOML run configuration.
//!
//! ```toml
//! s = 0.75
//! t_end = 1.0
//!
//! [grid]
//! n = 128
//!
//! [[theta]]
//! kind = "gaussian-blob"
//! center = [2.0, 3.0]
//! width = 0.3
//! amplitude = 1.0
//!
//! [vortices]
//! positions = [[3.5, 3.0]]
//! intensities = [0.2]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use gsqg::coupled::{regularize_initial_datum, SimConfig, TimeStepPolicy, VelocityPath, VortexCoupling};
use gsqg::diagnostics::plateau_radius;
use gsqg::pointvortex::{Integrator, VortexEnsemble};
use gsqg::spectral::{lp_norm, GridSpec, SpectralField};
use gsqg::Vec2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::initial::{build_theta, ThetaComponent};

fn default_t_end() -> f64 {
    1.0
}
fn default_diag_every() -> usize {
    10
}
fn default_tol_ode() -> f64 {
    Integrator::DEFAULT_TOL
}
fn default_energy_order() -> f64 {
    4.0
}
fn default_circle_samples() -> usize {
    gsqg::diagnostics::DEFAULT_CIRCLE_SAMPLES
}
fn default_side_length() -> f64 {
    2.0 * std::f64::consts::PI
}
fn default_one() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_support_threshold() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_side_length")]
    pub side_length: f64,
    pub n: usize,
    /// Retained fraction of the half-spectrum (2/3 rule by default).
    pub dealias: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeStepSection {
    pub cfl: Option<f64>,
    pub dt: Option<f64>,
    #[serde(default = "default_one")]
    pub max_courant: f64,
}

impl Default for TimeStepSection {
    fn default() -> Self {
        Self {
            cfl: None,
            dt: None,
            max_courant: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MollifierKind {
    #[default]
    Dirac,
    Bump,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifierSection {
    #[serde(default)]
    pub kind: MollifierKind,
    pub width: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityPathKind {
    #[default]
    Multiplier,
    Kernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexSection {
    pub positions: Vec<[f64; 2]>,
    pub intensities: Vec<f64>,
    /// Plateau values `β_i`; defaults to `θ₀(z_i)`.
    pub plateau_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorKind {
    #[default]
    Rk4,
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexOnlySection {
    pub t_end: Option<f64>,
    /// Step (rk4) or output interval (adaptive).
    pub dt: f64,
    #[serde(default)]
    pub integrator: IntegratorKind,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    /// `sup_j 2^{jσ}‖Δ̇_j(K_{s,ε} − K_s)‖_{L¹}` against ε.
    Kernel,
    /// Multiplier vs kernel-convolution velocity on the support of θ₀, against ε.
    VelocityPath,
    /// Mollified vs point vortex velocity, against the mollifier width.
    Mollifier,
    /// Final-state error against the finest cutoff, against the Galerkin cutoff N.
    Galerkin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub study: StudyKind,
    pub ladder: Vec<f64>,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "default_support_threshold")]
    pub support_threshold: f64,
}

/// The configuration file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub s: f64,
    /// Kernel regularization; defaults to eight grid spacings.
    pub eps: Option<f64>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    pub galerkin_n: Option<f64>,
    #[serde(default = "default_diag_every")]
    pub diag_every: usize,
    /// Snapshot every k-th diagnostic sample; 0 keeps only the final state.
    #[serde(default)]
    pub snapshot_every: usize,
    pub tol_plateau: Option<f64>,
    #[serde(default = "default_tol_ode")]
    pub tol_ode: f64,
    #[serde(default = "default_energy_order")]
    pub energy_order: f64,
    #[serde(default = "default_circle_samples")]
    pub circle_samples: usize,
    #[serde(default)]
    pub velocity_path: VelocityPathKind,
    #[serde(default = "default_true")]
    pub plateau_guard: bool,
    /// Apply the low-pass and physical cutoff of the ε-regularization to θ₀.
    #[serde(default)]
    pub regularize: bool,
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub time_step: TimeStepSection,
    #[serde(default)]
    pub mollifier: MollifierSection,
    #[serde(default)]
    pub theta: Vec<ThetaComponent>,
    pub vortices: VortexSection,
    pub vortex_only: Option<VortexOnlySection>,
    pub convergence: Option<ConvergenceSection>,
}

/// Parses TOML text; schema errors carry the offending key path.
pub fn parse_config_str(text: &str) -> Result<ConfigFile> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let msg = e.inner().message().trim().to_string();
        if path == "." || path.is_empty() {
            CliError::Config(msg)
        } else {
            CliError::Config(format!("at `{path}`: {msg}"))
        }
    })
}

/// Hex SHA-256 of the configuration bytes.
pub fn config_hash(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

/// A validated configuration ready to run.
#[derive(Debug, Clone)]
pub struct Setup {
    pub file: ConfigFile,
    pub config_hash: String,
    pub seed: u64,
    pub base_dir: PathBuf,
}

/// Everything the coupled stepper needs.
#[derive(Debug, Clone)]
pub struct CoupledSetup {
    pub sim: SimConfig,
    pub theta0: SpectralField,
    pub vortices: VortexEnsemble,
}

pub fn load(path: &Path, seed: u64) -> Result<Setup> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    setup_from_str(&text, seed, &base)
}

pub fn setup_from_str(text: &str, seed: u64, base_dir: &Path) -> Result<Setup> {
    let file = parse_config_str(text)?;
    if !(file.s > 0.0 && file.s < 1.0) {
        return Err(CliError::Validation(format!("s = {} must lie in (0, 1)", file.s)));
    }
    Ok(Setup {
        file,
        config_hash: config_hash(text),
        seed,
        base_dir: base_dir.to_path_buf(),
    })
}

impl Setup {
    pub fn grid(&self) -> Result<GridSpec> {
        let g = self
            .file
            .grid
            .as_ref()
            .ok_or_else(|| CliError::Config("missing `grid` section".into()))?;
        Ok(match g.dealias {
            Some(f) => GridSpec::with_dealias(g.side_length, g.n, f)?,
            None => GridSpec::new(g.side_length, g.n)?,
        })
    }

    fn positions(&self) -> Vec<Vec2> {
        self.file.vortices.positions.iter().map(|p| Vec2::from(*p)).collect()
    }

    /// Ensemble for point-vortex-only runs (plateau values unused).
    pub fn point_vortices(&self) -> Result<VortexEnsemble> {
        let v = &self.file.vortices;
        let betas = v.plateau_values.clone().unwrap_or_else(|| vec![0.0; v.positions.len()]);
        Ok(VortexEnsemble::new(self.positions(), v.intensities.clone(), betas)?)
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let f = &self.file;
        let grid = self.grid()?;
        let mut cfg = SimConfig::new(grid, f.s, f.eps.unwrap_or(8.0 * grid.spacing()));
        cfg.galerkin_n = f.galerkin_n;
        cfg.t_end = f.t_end;
        cfg.diag_every = f.diag_every;
        cfg.tol_plateau = f.tol_plateau;
        cfg.tol_ode = f.tol_ode;
        cfg.energy_order = f.energy_order;
        cfg.circle_samples = f.circle_samples;
        cfg.plateau_guard = f.plateau_guard;
        cfg.max_courant = f.time_step.max_courant;
        cfg.time_step = match (f.time_step.cfl, f.time_step.dt) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "at `time_step`: set either `cfl` or `dt`, not both".into(),
                ))
            }
            (None, Some(dt)) => TimeStepPolicy::Fixed(dt),
            (Some(c), None) => TimeStepPolicy::Cfl(c),
            (None, None) => TimeStepPolicy::Cfl(SimConfig::DEFAULT_CFL),
        };
        cfg.coupling = match f.mollifier.kind {
            MollifierKind::Dirac => VortexCoupling::Dirac,
            MollifierKind::Bump => VortexCoupling::Mollified {
                width: f.mollifier.width.ok_or_else(|| {
                    CliError::Config("at `mollifier`: kind = \"bump\" requires `width`".into())
                })?,
            },
        };
        cfg.velocity_path = match f.velocity_path {
            VelocityPathKind::Multiplier => VelocityPath::Multiplier,
            VelocityPathKind::Kernel => VelocityPath::KernelConvolution,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds and validates the coupled problem: grid, kernel resolution,
    /// safe region, θ₀ and the unit rule `R(0) < 1`.
    pub fn coupled(&self) -> Result<CoupledSetup> {
        let sim = self.sim_config()?;
        let grid = sim.grid;
        let l = grid.side_length();
        let positions = self.positions();
        for (i, z) in positions.iter().enumerate() {
            let ok = |c: f64| c >= l / 8.0 && c <= l - l / 8.0;
            if !(ok(z.x) && ok(z.y)) {
                return Err(CliError::Validation(format!(
                    "vortex {} at ({}, {}) is too near the boundary: the safe region is [{}, {}]²",
                    i + 1,
                    z.x,
                    z.y,
                    l / 8.0,
                    l - l / 8.0
                )));
            }
        }
        let mut theta0 = build_theta(&grid, &self.file.theta, self.seed, &self.base_dir)?;
        if self.file.regularize {
            theta0 = regularize_initial_datum(&theta0, sim.eps)?;
        }
        let v = &self.file.vortices;
        let betas = match &v.plateau_values {
            Some(b) => b.clone(),
            None => positions.iter().map(|z| theta0.eval_at(*z)).collect(),
        };
        let vortices = VortexEnsemble::new(positions, v.intensities.clone(), betas)?;
        let tol = match sim.tol_plateau {
            Some(t) => t,
            None => {
                let sup = lp_norm(&theta0, f64::INFINITY);
                if sup > 0.0 {
                    1e-6 * sup
                } else {
                    1e-12
                }
            }
        };
        let cap = l / 4.0;
        for (i, (z, beta)) in vortices.positions().iter().zip(vortices.plateau_values()).enumerate() {
            let r0 = plateau_radius(&theta0, *z, *beta, tol)?;
            if r0 < cap && r0 >= 1.0 {
                return Err(CliError::Validation(format!(
                    "plateau radius R(0) = {r0} of vortex {} is not below 1; rescale lengths so that R(0) < 1",
                    i + 1
                )));
            }
        }
        Ok(CoupledSetup { sim, theta0, vortices })
    }

    pub fn vortex_only(&self) -> Result<&VortexOnlySection> {
        self.file
            .vortex_only
            .as_ref()
            .ok_or_else(|| CliError::Config("missing `vortex_only` section".into()))
    }

    pub fn convergence(&self) -> Result<&ConvergenceSection> {
        self.file
            .convergence
            .as_ref()
            .ok_or_else(|| CliError::Config("missing `convergence` section".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
s = 0.75

[grid]
n = 128

[[theta]]
kind = "gaussian-blob"
center = [2.0, 3.0]
width = 0.3
amplitude = 1.0

[vortices]
positions = [[4.0, 3.0]]
intensities = [0.2]
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let setup = setup_from_str(MINIMAL, 0, Path::new(".")).unwrap();
        let cfg = setup.sim_config().unwrap();
        assert_eq!(cfg.t_end, 1.0);
        assert_eq!(cfg.time_step, TimeStepPolicy::Cfl(0.5));
        assert_eq!(cfg.coupling, VortexCoupling::Dirac);
        assert!((cfg.eps - 8.0 * cfg.grid.spacing()).abs() < 1e-15);
        assert_eq!(cfg.grid.side_length(), 2.0 * std::f64::consts::PI);
        let coupled = setup.coupled().unwrap();
        assert_eq!(coupled.vortices.len(), 1);
    }

    #[test]
    fn unresolvable_kernel_is_rejected() {
        let h = 2.0 * std::f64::consts::PI / 128.0;
        let text = format!("eps = {}\n{MINIMAL}", h / 4.0);
        let err = setup_from_str(&text, 0, Path::new(".")).unwrap().coupled().unwrap_err();
        assert!(err.to_string().contains("kernel unresolvable"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("n = 128", "n = 128\nresolution = 3");
        let err = setup_from_str(&text, 0, Path::new(".")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("resolution") && msg.contains("grid"), "{msg}");
        let err = setup_from_str(&format!("bogus = 1\n{MINIMAL}"), 0, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("bogus"));
        let text = MINIMAL.replace("amplitude = 1.0", "amplitude = 1.0\nsigma = 2");
        let msg = setup_from_str(&text, 0, Path::new(".")).unwrap_err().to_string();
        assert!(msg.contains("sigma"), "{msg}");
    }

    #[test]
    fn vortex_near_boundary_is_rejected() {
        let text = MINIMAL.replace("[[4.0, 3.0]]", "[[0.2, 3.0]]");
        let err = setup_from_str(&text, 0, Path::new(".")).unwrap().coupled().unwrap_err();
        assert!(err.to_string().contains("too near the boundary"), "{err}");
    }

    #[test]
    fn large_plateau_violates_unit_rule() {
        let text = r#"
s = 0.75
tol_plateau = 1e-2
[grid]
side_length = 12.0
n = 128
[[theta]]
kind = "plateau-patch"
center = [6.0, 6.0]
beta = 1.0
radius = 2.0
width = 0.3
[vortices]
positions = [[6.0, 6.0]]
intensities = [0.1]
"#;
        let err = setup_from_str(text, 0, Path::new(".")).unwrap().coupled().unwrap_err();
        assert!(err.to_string().contains("R(0)"), "{err}");
    }

    #[test]
    fn conflicting_time_step() {
        let text = format!("{MINIMAL}\n[time_step]\ncfl = 0.4\ndt = 0.01\n");
        let err = setup_from_str(&text, 0, Path::new(".")).unwrap().sim_config().unwrap_err();
        assert!(err.to_string().contains("time_step"));
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(config_hash("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
