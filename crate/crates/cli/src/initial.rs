//! Initial-data generators for θ₀.

use std::path::{Path, PathBuf};

use gsqg::profile::bump;
use gsqg::spectral::{GridSpec, SpectralField};
use gsqg::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::snapshot;

/// Transition shape of a plateau patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlateauProfile {
    /// `β·½erfc((r − radius)/width)`, with Gaussian spectral decay.
    #[default]
    Erfc,
    /// `β·χ(r/radius)` with the compactly supported cutoff profile; exactly
    /// `β` for `r ≤ radius/2`.
    Bump,
}

/// One additive component of θ₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ThetaComponent {
    /// `A·exp(−|x − c|²/w²)`.
    GaussianBlob {
        center: [f64; 2],
        width: f64,
        amplitude: f64,
    },
    /// `A·exp(−(|x − c| − r)²/t²)`.
    Annulus {
        center: [f64; 2],
        radius: f64,
        thickness: f64,
        amplitude: f64,
    },
    PlateauPatch {
        center: [f64; 2],
        beta: f64,
        radius: f64,
        width: f64,
        #[serde(default)]
        profile: PlateauProfile,
    },
    /// Raw snapshot (little-endian f64, row-major, `n × n`).
    File {
        path: PathBuf,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Random trigonometric polynomial with integer wavenumbers
    /// `|k_x|, |k_y| ≤ kmax`, drawn from the run seed.
    RandomBand { kmax: u32, amplitude: f64 },
}

fn one() -> f64 {
    1.0
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{name} must be positive, got {v}")))
    }
}

impl ThetaComponent {
    fn validate(&self) -> Result<()> {
        match self {
            ThetaComponent::GaussianBlob { width, .. } => positive("gaussian-blob width", *width),
            ThetaComponent::Annulus { radius, thickness, .. } => {
                positive("annulus radius", *radius)?;
                positive("annulus thickness", *thickness)
            }
            ThetaComponent::PlateauPatch { radius, width, .. } => {
                positive("plateau-patch radius", *radius)?;
                positive("plateau-patch width", *width)
            }
            ThetaComponent::File { .. } | ThetaComponent::RandomBand { .. } => Ok(()),
        }
    }

    fn sample(&self, grid: &GridSpec, seed: u64, base: &Path) -> Result<Vec<f64>> {
        let radial = |center: [f64; 2], f: &(dyn Fn(f64) -> f64 + Sync)| -> Vec<f64> {
            let c = Vec2::from(center);
            let n = grid.n();
            (0..grid.len())
                .map(|i| f(grid.nearest_image(grid.node(i % n, i / n) - c).norm()))
                .collect()
        };
        Ok(match *self {
            ThetaComponent::GaussianBlob {
                center,
                width,
                amplitude,
            } => radial(center, &|r| amplitude * (-(r * r) / (width * width)).exp()),
            ThetaComponent::Annulus {
                center,
                radius,
                thickness,
                amplitude,
            } => radial(center, &|r| {
                let d = (r - radius) / thickness;
                amplitude * (-d * d).exp()
            }),
            ThetaComponent::PlateauPatch {
                center,
                beta,
                radius,
                width,
                profile,
            } => match profile {
                PlateauProfile::Erfc => radial(center, &|r| beta * 0.5 * libm::erfc((r - radius) / width)),
                PlateauProfile::Bump => radial(center, &|r| beta * bump(r / radius)),
            },
            ThetaComponent::File { ref path, scale } => {
                let full = if path.is_absolute() { path.clone() } else { base.join(path) };
                let values = snapshot::read_values(&full)?;
                if values.len() != grid.len() {
                    return Err(CliError::Validation(format!(
                        "{}: holds {} values, grid needs {}",
                        full.display(),
                        values.len(),
                        grid.len()
                    )));
                }
                values.into_iter().map(|v| v * scale).collect()
            }
            ThetaComponent::RandomBand { kmax, amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let k = kmax as i64;
                let modes: Vec<(f64, f64, f64, f64)> = (-k..=k)
                    .flat_map(|ky| (-k..=k).map(move |kx| (kx as f64, ky as f64)))
                    .map(|(kx, ky)| (kx, ky, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                let n = grid.n();
                let fund = grid.fundamental();
                (0..grid.len())
                    .map(|i| {
                        let x = grid.node(i % n, i / n);
                        modes
                            .iter()
                            .map(|&(kx, ky, a, b)| {
                                let ph = fund * (kx * x.x + ky * x.y);
                                a * ph.cos() + b * ph.sin()
                            })
                            .sum::<f64>()
                            * amplitude
                    })
                    .collect()
            }
        })
    }
}

/// Sum of the components on the grid, dealiased. `base` resolves relative
/// file paths.
pub fn build_theta(grid: &GridSpec, components: &[ThetaComponent], seed: u64, base: &Path) -> Result<SpectralField> {
    let mut total = vec![0.0; grid.len()];
    for c in components {
        c.validate()?;
        for (t, v) in total.iter_mut().zip(c.sample(grid, seed, base)?) {
            *t += v;
        }
    }
    if let Some(i) = total.iter().position(|v| !v.is_finite()) {
        return Err(CliError::Validation(format!("initial datum is not finite at node {i}")));
    }
    Ok(SpectralField::from_physical(&total, *grid)?.dealiased())
}
