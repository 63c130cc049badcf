//! `manifest.json`: what ran, with which inputs, and how it ended.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminationInfo {
    /// `completed`, `plateau-collapse`, `vortex-collapse`, `cfl-collapse`,
    /// `nan` or `error`.
    pub reason: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub code_version: String,
    /// RFC 3339 wall-clock start.
    pub start_time: String,
    pub seed: u64,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
    pub termination: TerminationInfo,
    pub steps: usize,
    pub final_time: f64,
}

impl RunManifest {
    pub fn new(command: &str, config_hash: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            start_time: chrono::Utc::now().to_rfc3339(),
            seed,
            outputs: Vec::new(),
            termination: TerminationInfo {
                reason: "completed".into(),
                detail: String::new(),
            },
            steps: 0,
            final_time: 0.0,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::MissingArtifacts(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("simulate", "abc", 3);
        m.outputs = vec!["diagnostics.csv".into()];
        m.steps = 7;
        m.final_time = 0.5;
        m.write(dir.path()).unwrap();
        let back = RunManifest::read(dir.path()).unwrap();
        assert_eq!(back, m);
        assert!(chrono::DateTime::parse_from_rfc3339(&back.start_time).is_ok());
    }
}
