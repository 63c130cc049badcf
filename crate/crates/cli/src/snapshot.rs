//! Field snapshots: a flat little-endian `f64` file of physical values in
//! row-major order (`index = iy·n + ix`) plus a `key = value` text sidecar.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gsqg::coupled::CoupledState;
use gsqg::diagnostics::format_f64;
use gsqg::Vec2;

use crate::error::{CliError, Result};

/// Parsed sidecar metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Sidecar {
    pub n: usize,
    pub side_length: f64,
    pub t: f64,
    pub step: usize,
    pub config_hash: String,
    pub vortices: Vec<Vec2>,
}

pub const FORMAT_TAG: &str = "f64-le-row-major";

pub fn write_values(path: &Path, values: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_values(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(CliError::Validation(format!(
            "{}: length {} is not a multiple of 8",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("txt")
}

/// Writes `<stem>.bin` and `<stem>.txt` into `dir`; returns both file names.
pub fn write_snapshot(dir: &Path, stem: &str, state: &CoupledState, step: usize, config_hash: &str) -> Result<Vec<String>> {
    let grid = state.theta.grid();
    let bin = dir.join(format!("{stem}.bin"));
    write_values(&bin, &state.theta.to_physical())?;
    let mut text = String::new();
    let _ = writeln!(text, "format = {FORMAT_TAG}");
    let _ = writeln!(text, "n = {}", grid.n());
    let _ = writeln!(text, "side_length = {}", format_f64(grid.side_length()));
    let _ = writeln!(text, "t = {}", format_f64(state.t));
    let _ = writeln!(text, "step = {step}");
    let _ = writeln!(text, "config_hash = {config_hash}");
    let zs: Vec<String> = state
        .vortices
        .positions()
        .iter()
        .map(|z| format!("{} {}", format_f64(z.x), format_f64(z.y)))
        .collect();
    let _ = writeln!(text, "vortices = {}", zs.join("; "));
    let txt = sidecar_path(&bin);
    fs::write(&txt, text).map_err(|e| CliError::io(&txt, e))?;
    Ok(vec![format!("{stem}.bin"), format!("{stem}.txt")])
}

fn parse_err(path: &Path, what: &str) -> CliError {
    CliError::MissingArtifacts(format!("{}: malformed sidecar ({what})", path.display()))
}

pub fn read_sidecar(bin: &Path) -> Result<Sidecar> {
    let path = sidecar_path(bin);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let get = |key: &str| -> Result<&str> {
        text.lines()
            .filter_map(|l| l.split_once(" = "))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.trim())
            .ok_or_else(|| parse_err(&path, key))
    };
    if get("format")? != FORMAT_TAG {
        return Err(parse_err(&path, "format"));
    }
    let num = |key: &str| -> Result<f64> { get(key)?.parse().map_err(|_| parse_err(&path, key)) };
    let vortices = get("vortices")?
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let mut it = pair.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next()) {
                (Some(Ok(x)), Some(Ok(y))) => Ok(Vec2::new(x, y)),
                _ => Err(parse_err(&path, "vortices")),
            }
        })
        .collect::<Result<_>>()?;
    Ok(Sidecar {
        n: get("n")?.parse().map_err(|_| parse_err(&path, "n"))?,
        side_length: num("side_length")?,
        t: num("t")?,
        step: get("step")?.parse().map_err(|_| parse_err(&path, "step"))?,
        config_hash: get("config_hash")?.to_string(),
        vortices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use gsqg::pointvortex::VortexEnsemble;
    use gsqg::spectral::{GridSpec, SpectralField};

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::new(4.0, 16).unwrap();
        let theta = SpectralField::from_fn(g, |x| (x.x * 1.5).sin() + 0.1 * x.y.cos());
        let state = CoupledState {
            t: 0.25,
            theta: theta.clone(),
            vortices: VortexEnsemble::with_intensities(vec![Vec2::new(1.5, 2.5), Vec2::new(2.5, 1.0)], vec![1.0, -0.5])
                .unwrap(),
        };
        let files = write_snapshot(dir.path(), "snap_0000", &state, 12, "abc").unwrap();
        assert_eq!(files, vec!["snap_0000.bin", "snap_0000.txt"]);
        let bin = dir.path().join("snap_0000.bin");
        let values = read_values(&bin).unwrap();
        assert_eq!(values, theta.to_physical());
        let meta = read_sidecar(&bin).unwrap();
        assert_eq!(meta.n, 16);
        assert_eq!(meta.t, 0.25);
        assert_eq!(meta.step, 12);
        assert_eq!(meta.vortices, state.vortices.positions());
    }
}
