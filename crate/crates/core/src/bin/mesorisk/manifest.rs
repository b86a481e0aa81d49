//! Run manifests: enough to replay a command and check its outputs.

use std::path::{Path, PathBuf};

use mesorisk::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// `sha256` of the bytes framed as a git blob object.
pub fn content_hash(bytes: &[u8]) -> String {
    let digest = Sha256::new()
        .chain_update(format!("blob {}\0", bytes.len()).as_bytes())
        .chain_update(bytes)
        .finalize();
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(content_hash(&bytes))
}

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub role: String,
    pub path: String,
    pub hash: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    pub tolerances: serde_json::Value,
    pub notes: Vec<String>,
    pub details: serde_json::Value,
}

fn tolerances() -> serde_json::Value {
    serde_json::json!({
        "louvain_min_gain": mesorisk::community::MIN_GAIN,
        "normalization": mesorisk::factor_model::NORMALIZATION_TOLERANCE,
        "pd_floor": mesorisk::risk_engine::PD_FLOOR,
        "correlation_error_tail": crate::commands::CORRELATION_TAIL_THRESHOLD,
    })
}

/// Collects outputs written by one command into its output directory.
pub struct Outputs {
    dir: PathBuf,
    manifest: Manifest,
}

/// Paths inside the output directory are recorded relative to it, so runs
/// into different directories produce identical manifests.
fn portable(dir: &Path, p: &Path) -> PathBuf {
    p.strip_prefix(dir)
        .map_or_else(|_| p.to_path_buf(), Path::to_path_buf)
}

fn portable_config(cfg: &RunConfig) -> RunConfig {
    let dir = cfg.out_dir.as_path();
    let mut c = cfg.clone();
    for p in c
        .input
        .iter_mut()
        .chain(&mut c.meta)
        .chain(&mut c.communities)
    {
        *p = portable(dir, p);
    }
    for p in c.calibrations.iter_mut().chain(&mut c.portfolios) {
        *p = portable(dir, p);
    }
    c
}

impl Outputs {
    pub fn new(command: &str, cfg: &RunConfig) -> Result<Self> {
        std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::Io {
            path: cfg.out_dir.clone(),
            source: e,
        })?;
        Ok(Outputs {
            dir: cfg.out_dir.clone(),
            manifest: Manifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                seed: cfg.seed,
                config: portable_config(cfg),
                inputs: Vec::new(),
                outputs: Vec::new(),
                tolerances: tolerances(),
                notes: Vec::new(),
                details: serde_json::Value::Null,
            },
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<String> {
        let hash = hash_file(path)?;
        self.manifest.inputs.push(FileEntry {
            role: role.to_string(),
            path: portable(&self.dir, path).display().to_string(),
            hash: hash.clone(),
        });
        Ok(hash)
    }

    pub fn note(&mut self, note: impl Into<String>) {
        let note = note.into();
        println!("note: {note}");
        self.manifest.notes.push(note);
    }

    pub fn details(&mut self, value: serde_json::Value) {
        self.manifest.details = value;
    }

    /// Writes `bytes` to `name` and records its hash.
    pub fn write(&mut self, role: &str, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, bytes).map_err(|e| Error::Io { path, source: e })?;
        self.manifest.outputs.push(FileEntry {
            role: role.to_string(),
            path: name.to_string(),
            hash: content_hash(bytes),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, role: &str, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(role, name, text.as_bytes())
    }

    /// Writes `manifest_<command>.json`.
    pub fn finish(self) -> Result<()> {
        let name = format!("manifest_{}.json", self.manifest.command);
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        let path = self.path(&name);
        std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_git_sha256_object_ids() {
        // git hash-object --stdin in a sha256 repository
        assert_eq!(
            content_hash(b"hello\n"),
            "sha256:2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4"
        );
    }
}
