//! End-to-end runs of the `gsqg` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gsqg_cli::manifest::RunManifest;

const ZERO_THETA: &str = r#"
s = 0.75
t_end = 0.2

[grid]
side_length = 4.0
n = 32

[vortices]
positions = [[1.5, 2.0]]
intensities = [0.3]
"#;

fn gsqg(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsqg"))
        .args(args)
        .current_dir(dir)
        .env_remove("GSQG_CONFIG")
        .env_remove("GSQG_OUT")
        .env_remove("GSQG_SEED")
        .env_remove("GSQG_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|f| f.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

#[test]
fn zero_theta_gives_zero_norms_and_fixed_vortices() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), ZERO_THETA);
    let o = gsqg(&["simulate", "--config", cfg.to_str().unwrap(), "--out", "run"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let run = tmp.path().join("run");
    let (header, rows) = read_csv(&run.join("diagnostics.csv"));
    assert!(rows.len() >= 2);
    let col = |prefix: &str| header.iter().position(|h| h.starts_with(prefix)).unwrap();
    for name in ["mean", "L1 ", "L2 ", "L4 ", "Linf", "H1 ", "H2 ", "H3 ", "H4 ", "H3m2s"] {
        let c = col(name);
        assert!(rows.iter().all(|r| r[c] == 0.0), "{name}");
    }
    for name in ["z1x", "z1y"] {
        let c = col(name);
        assert!(rows.iter().all(|r| r[c] == rows[0][c]), "{name}");
    }
    let m = RunManifest::read(&run).unwrap();
    assert_eq!(m.termination.reason, "completed");
    assert!((m.final_time - 0.2).abs() < 1e-12);
    for f in &m.outputs {
        assert!(run.join(f).is_file(), "listed output {f} missing");
    }
    assert!(m.outputs.iter().any(|f| f.ends_with(".bin")));
}

#[test]
fn unresolvable_kernel_exits_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let h = 4.0 / 32.0;
    let cfg = write_config(tmp.path(), &format!("eps = {}\n{ZERO_THETA}", h / 4.0));
    let o = gsqg(&["simulate", "--config", cfg.to_str().unwrap(), "--out", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kernel unresolvable"), "{}", stderr(&o));
    let m = RunManifest::read(&tmp.path().join("run")).unwrap();
    assert_eq!(m.termination.reason, "error");
}

#[test]
fn unknown_key_is_named_in_the_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &ZERO_THETA.replace("n = 32", "n = 32\nwidth = 2"));
    let o = gsqg(&["simulate", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("width") && err.contains("grid"), "{err}");
}

#[test]
fn config_path_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), ZERO_THETA);
    let o = Command::new(env!("CARGO_BIN_EXE_gsqg"))
        .args(["simulate"])
        .current_dir(tmp.path())
        .env("GSQG_CONFIG", &cfg)
        .env("GSQG_OUT", "envrun")
        .env("GSQG_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("envrun/diagnostics.csv").is_file());
}

#[test]
fn oversized_fixed_step_is_a_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
s = 0.75
t_end = 1.0
plateau_guard = false
[grid]
side_length = 4.0
n = 32
[time_step]
dt = 5.0
[[theta]]
kind = "gaussian-blob"
center = [2.0, 2.0]
width = 0.4
amplitude = 1.0
[vortices]
positions = [[2.6, 2.0]]
intensities = [0.2]
"#;
    let cfg = write_config(tmp.path(), text);
    let o = gsqg(&["simulate", "--config", cfg.to_str().unwrap(), "--out", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let m = RunManifest::read(&tmp.path().join("run")).unwrap();
    assert_eq!(m.termination.reason, "error");
    assert!(m.termination.detail.contains("CFL"));
}

#[test]
fn vortex_only_pair_closes_after_one_period() {
    let s: f64 = 0.75;
    let c_s = gsqg::kernels::c_s_constant(s).unwrap();
    let (d, a) = (1.0f64, 1.0);
    let period = 2.0 * std::f64::consts::PI * d.powf(4.0 - 2.0 * s) / (2.0 * c_s * a);
    let text = format!(
        r#"
s = {s}
[vortices]
positions = [[-0.5, 0.0], [0.5, 0.0]]
intensities = [{a}, {a}]
[vortex_only]
t_end = {period}
dt = {}
"#,
        period / 2000.0
    );
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &text);
    let o = gsqg(&["vortex-only", "--config", cfg.to_str().unwrap(), "--out", "pv"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&tmp.path().join("pv/trajectory.csv"));
    assert_eq!(header, ["t", "z1x", "z1y", "z2x", "z2y", "H", "I", "min_dist"]);
    assert_eq!(rows.len(), 2001);
    let last = rows.last().unwrap();
    let err = (last[1] + 0.5).hypot(last[2]).max((last[3] - 0.5).hypot(last[4]));
    assert!(err < 1e-8 * d, "{err}");
}

#[test]
fn kernel_convergence_writes_rates() {
    let text = r#"
s = 0.75
[grid]
side_length = 4.0
n = 64
[vortices]
positions = [[2.0, 2.0]]
intensities = [1.0]
[convergence]
study = "kernel"
ladder = [0.5, 0.25, 0.125]
sigma = 0.0
"#;
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), text);
    let o = gsqg(&["convergence", "--config", cfg.to_str().unwrap(), "--out", "conv"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&tmp.path().join("conv/rates.csv"));
    assert_eq!(header, ["study", "parameter", "error", "fitted_slope", "r_squared"]);
    assert_eq!(rows.len(), 3);
    // ‖χ_ε K_s‖_{L¹} ~ ε^{2s−1}
    let slope = rows[0][3];
    assert!(slope > 0.0 && slope.is_finite(), "{slope}");
}

#[test]
fn plots_are_deterministic_with_one_heatmap_per_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), ZERO_THETA);
    assert!(gsqg(&["simulate", "--config", cfg.to_str().unwrap(), "--out", "run"], tmp.path())
        .status
        .success());
    let o = gsqg(&["plot", "run"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let run = tmp.path().join("run");
    let mut pngs: Vec<String> = fs::read_dir(&run)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".png"))
        .collect();
    pngs.sort();
    assert_eq!(pngs.len(), 2, "{pngs:?}");
    assert!(pngs.contains(&"panels.png".to_string()));
    let first: Vec<Vec<u8>> = pngs.iter().map(|p| fs::read(run.join(p)).unwrap()).collect();
    assert!(gsqg(&["plot", "run"], tmp.path()).status.success());
    let second: Vec<Vec<u8>> = pngs.iter().map(|p| fs::read(run.join(p)).unwrap()).collect();
    assert_eq!(first, second);
}

#[test]
fn plot_without_samples_fails() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("run")).unwrap();
    fs::write(tmp.path().join("run/diagnostics.csv"), "t [time],mean [theta]\n").unwrap();
    let o = gsqg(&["plot", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no samples"));
}

#[test]
fn check_subset_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = gsqg(&["check", "--only", "1,3,9"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(out.lines().count(), 3);
    assert!(out.lines().all(|l| l.contains("PASS")), "{out}");
}
