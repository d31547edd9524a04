//! Output directory bookkeeping and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    TimedOut,
    Passed,
    Failed,
    Error,
}

impl RunStatus {
    pub fn exit_code(self) -> u8 {
        match self {
            RunStatus::Converged | RunStatus::Passed => 0,
            RunStatus::TimedOut => 2,
            RunStatus::Failed | RunStatus::Error => 1,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: Value,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub wall_seconds: f64,
    pub status: RunStatus,
    pub exit_code: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub files: Vec<FileEntry>,
    /// Hash of the config echo and every output file; independent of wall times.
    pub content_sha256: String,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub extra: Value,
}

/// Collects the files of one run and writes the manifest last.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileEntry>,
    started: SystemTime,
    clock: Instant,
}

pub const MANIFEST: &str = "manifest.json";

fn unix(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

fn hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)
            .with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
            started: SystemTime::now(),
            clock: Instant::now(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `contents` to `name` (relative to the root) and records it in the inventory.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .with_context(|| format!("cannot create {}", parent.display()))?;
        }
        write_atomic(&path, contents)?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry {
            path: name.to_string(),
            bytes: contents.len() as u64,
            sha256: hex(contents),
        });
        Ok(())
    }

    pub fn finish(
        self,
        command: &str,
        config: Value,
        status: RunStatus,
        error: Option<String>,
        extra: Value,
    ) -> Result<RunManifest> {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&config)?);
        for f in &self.files {
            hasher.update(f.path.as_bytes());
            hasher.update([0]);
            hasher.update(f.sha256.as_bytes());
        }
        let manifest = RunManifest {
            tool: "mmcf",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config,
            started_unix: unix(self.started),
            finished_unix: unix(SystemTime::now()),
            wall_seconds: self.clock.elapsed().as_secs_f64(),
            status,
            exit_code: status.exit_code(),
            error,
            files: self.files,
            content_sha256: format!("{:x}", hasher.finalize()),
            extra,
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        write_atomic(&self.root.join(MANIFEST), text.as_bytes())?;
        Ok(manifest)
    }
}

/// Writes through a sibling temporary file and renames it into place.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot move {} into place", path.display()))
}
