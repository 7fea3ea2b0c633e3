//! Output formatting, file writing and the run manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{CliError, Invocation};

/// Run record written next to the outputs as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub subcommand: String,
    pub version: String,
    pub seed: u64,
    pub invocation: Invocation,
    /// Every file written by the run, manifest excluded.
    pub outputs: Vec<PathBuf>,
    pub wall_time_secs: f64,
}

/// Format with six significant digits.
pub fn fmt6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    // The exponent is taken after rounding so that 9.999996 becomes 10.0000.
    let sci = format!("{x:.5e}");
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-5..6).contains(&exp) {
        format!("{:.*}", (5 - exp).max(0) as usize, x)
    } else {
        sci
    }
}

/// Collects output files under one directory.
pub struct OutDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root)
            .map_err(|e| CliError::validation(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    fn record(&mut self, name: &str) -> PathBuf {
        let path = self.root.join(name);
        self.written.push(path.clone());
        path
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.record(name);
        std::fs::write(&path, text).map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))
    }

    /// Write a CSV with the given header and rows of already formatted fields.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let path = self.record(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn finish(self, inv: &Invocation, wall_time_secs: f64) -> Result<Manifest, CliError> {
        let manifest = Manifest {
            subcommand: inv.subcommand().into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: inv.seed,
            invocation: inv.clone(),
            outputs: self.written,
            wall_time_secs,
        };
        let path = self.root.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))?;
        Ok(manifest)
    }
}
