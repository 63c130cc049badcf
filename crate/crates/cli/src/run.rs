//! Drivers behind `simulate`, `vortex-only` and `convergence`.

use std::fs;
use std::path::Path;

use gsqg::coupled::{mollified_average, simulate_with, CoupledState, Termination};
use gsqg::diagnostics::{format_f64, velocity_path_gap, write_csv, DiagnosticsRecord};
use gsqg::fit::{fit_log_log, LineFit};
use gsqg::kernels::{kernel_convergence_rate, KernelParams};
use gsqg::pointvortex::{hamiltonian, integrate, min_pairwise_distance, moment_of_inertia, Integrator};
use gsqg::spectral::{biot_savart, lp_norm};
use rayon::prelude::*;

use crate::config::{IntegratorKind, Setup, StudyKind};
use crate::error::{CliError, Result};
use crate::initial::build_theta;
use crate::manifest::{RunManifest, TerminationInfo};
use crate::snapshot::write_snapshot;

pub const DIAGNOSTICS_CSV: &str = "diagnostics.csv";
pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const RATES_CSV: &str = "rates.csv";

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes the manifest on both success and failure; an `Err` from `body`
/// is recorded with reason `error` before being passed on.
fn with_manifest(
    out: &Path,
    mut manifest: RunManifest,
    body: impl FnOnce(&mut RunManifest) -> Result<()>,
) -> Result<RunManifest> {
    create_dir(out)?;
    let result = body(&mut manifest);
    if let Err(e) = &result {
        if manifest.termination.reason == "completed" {
            manifest.termination = TerminationInfo {
                reason: "error".into(),
                detail: e.to_string(),
            };
        }
    }
    manifest.write(out)?;
    result.map(|_| manifest)
}

fn termination_detail(t: &Termination, h: f64) -> String {
    match t {
        Termination::Completed => String::new(),
        Termination::PlateauCollapse { vortex, radius } => {
            format!("plateau radius of vortex {} fell to {} (< 2h = {})", vortex + 1, radius, 2.0 * h)
        }
        Termination::VortexCollapse { min_distance } => format!("minimum vortex distance {min_distance:e}"),
        Termination::CflCollapse { dt } => format!("CFL step shrank to {dt:e}"),
        Termination::NumericalBlowup { t } => format!("non-finite values at t = {t}"),
    }
}

/// Coupled run: `diagnostics.csv`, snapshots `snap_NNNNN.{bin,txt}` and
/// `manifest.json`. NaN and CFL collapse exit as numerical failures after
/// the artifacts are written.
pub fn run_simulate(setup: &Setup, out: &Path) -> Result<RunManifest> {
    let manifest = RunManifest::new("simulate", &setup.config_hash, setup.seed);
    with_manifest(out, manifest, |m| {
        let problem = setup.coupled()?;
        let every = setup.file.snapshot_every;
        let mut records: Vec<DiagnosticsRecord> = Vec::new();
        let mut pending: Vec<(usize, CoupledState)> = Vec::new();
        let result = simulate_with(&problem.sim, &problem.theta0, problem.vortices.clone(), |state, rec| {
            let idx = records.len();
            if every > 0 && idx.is_multiple_of(every) {
                pending.push((idx, state.clone()));
            }
            records.push(rec.clone());
        });
        let csv = write_csv(&records)?;
        write_text(&out.join(DIAGNOSTICS_CSV), &csv)?;
        m.outputs.push(DIAGNOSTICS_CSV.into());
        let outcome = result?;

        let last = records.len().saturating_sub(1);
        let diag_every = problem.sim.diag_every;
        let final_is_last = records.last().is_some_and(|r| r.t == outcome.final_state.t);
        for (idx, state) in &pending {
            let step = if *idx == last && final_is_last { outcome.steps } else { idx * diag_every };
            m.outputs
                .extend(write_snapshot(out, &format!("snap_{idx:05}"), state, step, &setup.config_hash)?);
        }
        let final_written = final_is_last && pending.last().is_some_and(|(i, _)| *i == last);
        if !final_written {
            let idx = if final_is_last { last } else { records.len() };
            m.outputs.extend(write_snapshot(
                out,
                &format!("snap_{idx:05}"),
                &outcome.final_state,
                outcome.steps,
                &setup.config_hash,
            )?);
        }

        m.steps = outcome.steps;
        m.final_time = outcome.final_state.t;
        let detail = termination_detail(&outcome.termination, problem.sim.grid.spacing());
        m.termination = TerminationInfo {
            reason: outcome.termination.label().into(),
            detail: detail.clone(),
        };
        match outcome.termination {
            Termination::CflCollapse { .. } | Termination::NumericalBlowup { .. } => Err(CliError::Numerical(detail)),
            _ => Ok(()),
        }
    })
}

/// Header of `trajectory.csv`.
pub fn trajectory_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for i in 1..=n {
        h.push(format!("z{i}x"));
        h.push(format!("z{i}y"));
    }
    h.extend(["H".into(), "I".into(), "min_dist".into()]);
    h
}

/// Point-vortex system alone: `trajectory.csv` with positions and the
/// conserved quantities at every output time.
pub fn run_vortex_only(setup: &Setup, out: &Path) -> Result<RunManifest> {
    let manifest = RunManifest::new("vortex-only", &setup.config_hash, setup.seed);
    with_manifest(out, manifest, |m| {
        let vo = setup.vortex_only()?;
        let s = setup.file.s;
        let ens = setup.point_vortices()?;
        let t_end = vo.t_end.unwrap_or(setup.file.t_end);
        let method = match vo.integrator {
            IntegratorKind::Rk4 => Integrator::Rk4,
            IntegratorKind::Adaptive => Integrator::AdaptiveRk45 {
                tol: vo.tol.unwrap_or(setup.file.tol_ode),
            },
        };
        let traj = match integrate(&ens, s, t_end, vo.dt, method) {
            Ok(t) => t,
            Err(e @ gsqg::Error::NearCollapse { .. }) => {
                m.termination = TerminationInfo {
                    reason: "vortex-collapse".into(),
                    detail: e.to_string(),
                };
                return Err(e.into());
            }
            Err(e) => return Err(e.into()),
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Validation(format!("csv: {e}"));
        w.write_record(trajectory_header(ens.len())).map_err(io)?;
        for (t, e) in traj.times.iter().zip(&traj.states) {
            let mut row = vec![format_f64(*t)];
            for z in e.positions() {
                row.push(format_f64(z.x));
                row.push(format_f64(z.y));
            }
            row.push(format_f64(hamiltonian(e, s)?));
            row.push(format_f64(moment_of_inertia(e)));
            row.push(format_f64(min_pairwise_distance(e)));
            w.write_record(&row).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Validation(format!("csv: {e}")))?;
        let path = out.join(TRAJECTORY_CSV);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        m.outputs.push(TRAJECTORY_CSV.into());
        m.steps = traj.times.len() - 1;
        m.final_time = *traj.times.last().expect("at least t = 0");
        Ok(())
    })
}

/// One row of `rates.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub parameter: f64,
    pub error: f64,
}

/// Result of a convergence study.
#[derive(Debug, Clone)]
pub struct Study {
    pub name: &'static str,
    pub rows: Vec<RateRow>,
    pub fit: Option<LineFit>,
}

impl Study {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("study,parameter,error,fitted_slope,r_squared\n");
        let (slope, r2) = self
            .fit
            .map_or((f64::NAN, f64::NAN), |f| (f.slope, f.r_squared));
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.name,
                format_f64(r.parameter),
                format_f64(r.error),
                format_f64(slope),
                format_f64(r2)
            ));
        }
        out
    }
}

fn study_from(name: &'static str, params: &[f64], errors: Vec<f64>) -> Study {
    let fit = fit_log_log(params, &errors);
    Study {
        name,
        rows: params
            .iter()
            .zip(errors)
            .map(|(p, e)| RateRow { parameter: *p, error: e })
            .collect(),
        fit,
    }
}

/// Runs the configured ladder and fits `ln error` against `ln parameter`.
pub fn convergence_study(setup: &Setup) -> Result<Study> {
    let conv = setup.convergence()?;
    let s = setup.file.s;
    let ladder = &conv.ladder;
    if ladder.len() < 2 {
        return Err(CliError::Validation(format!(
            "convergence ladder needs at least 2 values, got {}",
            ladder.len()
        )));
    }
    let grid = setup.grid()?;
    match conv.study {
        StudyKind::Kernel => {
            let rate = kernel_convergence_rate(&grid, s, conv.sigma, ladder)?;
            Ok(study_from("kernel", &rate.eps, rate.norms))
        }
        StudyKind::VelocityPath => {
            let theta = build_theta(&grid, &setup.file.theta, setup.seed, &setup.base_dir)?;
            let errors = ladder
                .par_iter()
                .map(|&eps| velocity_path_gap(&theta, &KernelParams::new(s, eps)?, conv.support_threshold))
                .collect::<gsqg::Result<Vec<_>>>()?;
            Ok(study_from("velocity-path", ladder, errors))
        }
        StudyKind::Mollifier => {
            let theta = build_theta(&grid, &setup.file.theta, setup.seed, &setup.base_dir)?;
            let v = biot_savart(&theta, s)?;
            let (vx, vy) = v.to_physical();
            let zs = setup.point_vortices()?.positions().to_vec();
            let errors = ladder
                .iter()
                .map(|&w| {
                    if !(w >= grid.spacing()) {
                        return Err(CliError::Validation(format!(
                            "mollifier width {w} is below the grid spacing {}",
                            grid.spacing()
                        )));
                    }
                    Ok(zs
                        .iter()
                        .map(|z| {
                            let exact = v.eval_at(*z);
                            let ax = mollified_average(&vx, &grid, *z, w);
                            let ay = mollified_average(&vy, &grid, *z, w);
                            (ax - exact.x).hypot(ay - exact.y)
                        })
                        .fold(0.0, f64::max))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(study_from("mollifier", ladder, errors))
        }
        StudyKind::Galerkin => {
            let base = setup.coupled()?;
            let finals = ladder
                .par_iter()
                .map(|&cut| {
                    let mut cfg = base.sim.clone();
                    cfg.galerkin_n = Some(cut);
                    gsqg::coupled::simulate(&cfg, &base.theta0, base.vortices.clone()).map(|o| o.final_state)
                })
                .collect::<gsqg::Result<Vec<_>>>()?;
            let (ref_idx, _) = ladder
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
            let reference = &finals[ref_idx];
            let mut params = Vec::new();
            let mut errors = Vec::new();
            for (i, f) in finals.iter().enumerate() {
                if i == ref_idx {
                    continue;
                }
                let dz = f
                    .vortices
                    .positions()
                    .iter()
                    .zip(reference.vortices.positions())
                    .map(|(a, b)| (*a - *b).norm_sq())
                    .sum::<f64>()
                    .sqrt();
                errors.push(lp_norm(&f.theta.sub(&reference.theta)?, 2.0) + dz);
                params.push(ladder[i]);
            }
            Ok(study_from("galerkin", &params, errors))
        }
    }
}

/// Writes `rates.csv` for the configured study.
pub fn run_convergence(setup: &Setup, out: &Path) -> Result<RunManifest> {
    let manifest = RunManifest::new("convergence", &setup.config_hash, setup.seed);
    with_manifest(out, manifest, |m| {
        let study = convergence_study(setup)?;
        write_text(&out.join(RATES_CSV), &study.to_csv())?;
        m.outputs.push(RATES_CSV.into());
        m.steps = study.rows.len();
        Ok(())
    })
}
