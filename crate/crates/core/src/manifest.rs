//! Run manifests: a JSON record of the configuration, seeds, timestamps and
//! the checksum of every emitted file. The manifest is written with status
//! `running` before any data file and rewritten once the files are final.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// The configuration as TOML; parses back to the same config.
    pub config: String,
    pub seeds: Vec<u64>,
    pub threads: Option<usize>,
    pub started: String,
    pub finished: Option<String>,
    pub status: String,
    pub files: Vec<FileEntry>,
    /// Free-form run facts such as wall times.
    pub notes: Vec<String>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let bytes = fs::read(path)?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

/// A manifest bound to its output directory.
pub struct ManifestWriter {
    dir: PathBuf,
    manifest: RunManifest,
}

impl ManifestWriter {
    /// Creates `dir` and writes the initial manifest.
    pub fn start(
        dir: &Path,
        command: &str,
        config: &RunConfig,
        seeds: Vec<u64>,
        threads: Option<usize>,
    ) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let writer = Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                config: config.to_toml(),
                seeds,
                threads,
                started: now(),
                finished: None,
                status: "running".into(),
                files: Vec::new(),
                notes: Vec::new(),
            },
        };
        writer.write()?;
        Ok(writer)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.manifest.notes.push(note.into());
    }

    /// Records `name` (inside the output directory), replacing any previous entry.
    pub fn register(&mut self, name: &str) -> Result<()> {
        let (sha256, bytes) = sha256_file(&self.dir.join(name))?;
        self.manifest.files.retain(|f| f.path != name);
        self.manifest.files.push(FileEntry {
            path: name.into(),
            sha256,
            bytes,
        });
        Ok(())
    }

    pub fn finish(mut self, status: &str) -> Result<RunManifest> {
        self.manifest.finished = Some(now());
        self.manifest.status = status.into();
        self.write()?;
        Ok(self.manifest)
    }

    fn write(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(self.dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    serde_json::from_str(&text)
        .map_err(|e| crate::error::Error::Config(format!("manifest: {e}")))
}

/// Checks every recorded checksum against the files on disk.
pub fn verify_manifest(dir: &Path) -> Result<bool> {
    let m = read_manifest(dir)?;
    for f in &m.files {
        if sha256_file(&dir.join(&f.path))?.0 != f.sha256 {
            return Ok(false);
        }
    }
    Ok(true)
}
