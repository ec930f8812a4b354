//! Run manifests: every command records its inputs, outputs and
//! configuration with content digests so runs can be audited and
//! compared.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use hazardgen_core::Result;

#[derive(Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub seed: Option<u64>,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_at: String,
    pub wall_clock_seconds: f64,
    pub version: String,
}

pub struct ManifestBuilder {
    command: String,
    seed: Option<u64>,
    config: BTreeMap<String, String>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    started_at: chrono::DateTime<chrono::Utc>,
    clock: Instant,
}

/// Manifest path for commands whose output is a single file.
pub fn sibling_manifest(path: &Path) -> PathBuf {
    PathBuf::from(format!("{}.manifest.json", path.display()))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex_string(&hasher.finalize()))
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{:02x}", b)).collect()
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            seed: None,
            config: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_at: chrono::Utc::now(),
            clock: Instant::now(),
        }
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.seed = Some(seed);
        self
    }

    pub fn config(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.config.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> Result<&mut Self> {
        self.outputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(self)
    }

    pub fn outputs(&mut self, paths: &[PathBuf]) -> Result<&mut Self> {
        for p in paths {
            self.output(p)?;
        }
        Ok(self)
    }

    /// Write `manifest.json`-style output at `path`.
    pub fn write(&self, path: &Path) -> Result<()> {
        let manifest = RunManifest {
            command: self.command.clone(),
            argv: std::env::args().collect(),
            seed: self.seed,
            config: self.config.clone(),
            inputs: self.inputs.iter().map(copy_digest).collect(),
            outputs: self.outputs.iter().map(copy_digest).collect(),
            started_at: self.started_at.to_rfc3339(),
            wall_clock_seconds: self.clock.elapsed().as_secs_f64(),
            version: hazardgen_core::VERSION.to_string(),
        };
        let json = serde_json::to_string_pretty(&manifest)
            .expect("manifest serialises");
        std::fs::write(path, json)?;
        Ok(())
    }
}

fn copy_digest(d: &FileDigest) -> FileDigest {
    FileDigest {
        path: d.path.clone(),
        sha256: d.sha256.clone(),
    }
}
