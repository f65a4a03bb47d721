use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one command run. Every produced artifact is listed with its
/// content hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: Value,
    pub seed: u64,
    pub inputs: Vec<FileHash>,
    pub artifacts: Vec<FileHash>,
    pub started_unix_ms: u128,
    pub wall_clock_secs: f64,
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Hash of a file, or of a directory's sorted (relative path, file hash) list.
pub fn hash_path(path: &Path) -> Result<FileHash, CliError> {
    let sha256 = if path.is_dir() {
        let mut entries = Vec::new();
        collect_files(path, path, &mut entries)?;
        entries.sort();
        let mut h = Sha256::new();
        for (rel, digest) in entries {
            h.update(rel.as_bytes());
            h.update([0]);
            h.update(digest.as_bytes());
            h.update(b"\n");
        }
        hex(&h.finalize())
    } else {
        sha256_bytes(&fs::read(path).map_err(CliError::io(path))?)
    };
    Ok(FileHash { path: path.to_owned(), sha256 })
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<(String, String)>) -> Result<(), CliError> {
    for entry in fs::read_dir(dir).map_err(CliError::io(dir))? {
        let p = entry.map_err(CliError::io(dir))?.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else {
            let rel = p.strip_prefix(root).unwrap_or(&p).to_string_lossy().replace('\\', "/");
            out.push((rel, sha256_bytes(&fs::read(&p).map_err(CliError::io(&p))?)));
        }
    }
    Ok(())
}

/// Start a manifest; call [`ManifestBuilder::finish`] after the artifacts
/// are written.
pub struct ManifestBuilder {
    command: String,
    config: Value,
    seed: u64,
    inputs: Vec<FileHash>,
    started: SystemTime,
    clock: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: Value, seed: u64) -> Self {
        ManifestBuilder {
            command: command.into(),
            config,
            seed,
            inputs: Vec::new(),
            started: SystemTime::now(),
            clock: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.push(hash_path(path)?);
        Ok(())
    }

    pub fn finish(self, artifacts: &[PathBuf]) -> Result<RunManifest, CliError> {
        Ok(RunManifest {
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config: self.config,
            seed: self.seed,
            inputs: self.inputs,
            artifacts: artifacts.iter().map(|p| hash_path(p)).collect::<Result<_, _>>()?,
            started_unix_ms: self.started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis()),
            wall_clock_secs: self.clock.elapsed().as_secs_f64(),
        })
    }
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, json + "\n").map_err(CliError::io(path))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let src = fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&src).map_err(|e| CliError::input(path, e))
    }
}
