//! Artifact writers: CSV tables, run manifests and config echoes.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

impl InputFile {
    pub fn read(path: &Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(InputFile {
            path: path.display().to_string(),
            sha256: format!("{:x}", Sha256::digest(&bytes)),
        })
    }
}

/// Everything needed to replay a run.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub command: &'a str,
    pub tool_version: &'static str,
    pub seed: u64,
    pub argv: &'a [String],
    pub config: &'a Config,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<String>,
    pub results: serde_json::Value,
}

/// Collects files written into one output directory.
pub struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, name: &str) {
        self.written.push(self.path(name).display().to_string());
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.path(name);
        std::fs::write(&path, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        self.record(name);
        Ok(())
    }

    pub fn write_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let path = self.path(name);
        let err =
            |e: csv::Error| CliError::Runtime(format!("cannot write {}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(err)?;
        for row in rows {
            w.serialize(row).map_err(err)?;
        }
        w.flush()?;
        self.record(name);
        Ok(())
    }

    /// Writes the merged config and the manifest; call last.
    pub fn finish(
        mut self,
        command: &str,
        cfg: &Config,
        argv: &[String],
        inputs: Vec<InputFile>,
        results: serde_json::Value,
    ) -> Result<PathBuf, CliError> {
        self.write_text("config.toml", &cfg.to_toml())?;
        let manifest = RunManifest {
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed(),
            argv,
            config: cfg,
            inputs,
            outputs: self.written.clone(),
            results,
        };
        let path = self.path("manifest.json");
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        std::fs::write(&path, json + "\n")
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

/// SNR at which a decreasing curve crosses `target`, interpolating
/// `log10(value)` linearly between grid points.
pub fn snr_at(grid: &[f64], values: &[f64], target: f64) -> Option<f64> {
    let lt = target.log10();
    grid.windows(2).zip(values.windows(2)).find_map(|(s, v)| {
        if v[0] >= target && v[1] <= target && v[0] > 0.0 && v[1] > 0.0 {
            let (a, b) = (v[0].log10(), v[1].log10());
            if a == b {
                Some(s[0])
            } else {
                Some(s[0] + (s[1] - s[0]) * (a - lt) / (a - b))
            }
        } else {
            None
        }
    })
}
