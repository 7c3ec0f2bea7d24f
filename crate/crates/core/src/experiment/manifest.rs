use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::json::{read_json, write_json};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Artifacts are relative to the manifest's directory; inputs are absolute.
    pub path: String,
    pub sha256: String,
}

/// Everything needed to locate, verify and rerun one command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format_version: u32,
    pub command: String,
    pub run: String,
    pub config: ExperimentConfig,
    #[serde(default)]
    pub base: Option<String>,
    pub inputs: BTreeMap<String, FileRecord>,
    pub artifacts: BTreeMap<String, FileRecord>,
    pub seeds: BTreeMap<String, u64>,
    pub versions: BTreeMap<String, String>,
    pub seconds: f64,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, run: String, config: &ExperimentConfig) -> Self {
        let s = config.seeds();
        let seeds = [("data", s.data), ("born", s.born), ("init", s.init), ("train", s.train), ("sample", s.sample)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let versions = [
            ("ttflow".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("config_format".to_string(), config.format_version.to_string()),
            ("manifest_format".to_string(), MANIFEST_VERSION.to_string()),
        ]
        .into_iter()
        .collect();
        Self {
            format_version: MANIFEST_VERSION,
            command: command.to_string(),
            run,
            config: config.clone(),
            base: None,
            inputs: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            seeds,
            versions,
            seconds: 0.0,
            metrics: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, name: &str, path: &Path) -> Result<()> {
        let abs = std::path::absolute(path)?;
        self.inputs
            .insert(name.to_string(), FileRecord { path: abs.display().to_string(), sha256: sha256_file(&abs)? });
        Ok(())
    }

    /// Records a file that lives in `dir`, the manifest's directory.
    pub fn add_artifact(&mut self, name: &str, dir: &Path, file: &str) -> Result<()> {
        self.artifacts
            .insert(name.to_string(), FileRecord { path: file.to_string(), sha256: sha256_file(&dir.join(file))? });
        Ok(())
    }

    pub fn artifact_path(&self, manifest_path: &Path, name: &str) -> Result<PathBuf> {
        let rec = self.artifacts.get(name).ok_or_else(|| Error::Report {
            manifest: manifest_path.display().to_string(),
            message: format!("no artifact named {name:?}"),
        })?;
        let p = manifest_path.parent().unwrap_or(Path::new(".")).join(&rec.path);
        if !p.exists() {
            return Err(Error::Report {
                manifest: manifest_path.display().to_string(),
                message: format!("artifact {name:?} is missing at {}", p.display()),
            });
        }
        Ok(p)
    }

    pub fn input_path(&self, manifest_path: &Path, name: &str) -> Result<PathBuf> {
        let rec = self.inputs.get(name).ok_or_else(|| Error::Report {
            manifest: manifest_path.display().to_string(),
            message: format!("no input named {name:?}"),
        })?;
        let p = PathBuf::from(&rec.path);
        if !p.exists() {
            return Err(Error::Report {
                manifest: manifest_path.display().to_string(),
                message: format!("input {name:?} is missing at {}", p.display()),
            });
        }
        Ok(p)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        read_json(path).map_err(|e| Error::Report { manifest: path.display().to_string(), message: e.to_string() })
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_input() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc.txt");
        std::fs::write(&p, b"abc").unwrap();
        assert_eq!(sha256_file(&p).unwrap(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
