//! Result documents and atomic file output.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Bumped on any change to the document layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// The mathematics said no: a violation, a failed hypothesis, a set
    /// that is not thick.
    Failed,
}

/// Everything that varies between identical runs lives here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub started_unix_seconds: f64,
    pub wall_seconds: f64,
    pub available_threads: usize,
    pub os: String,
    pub arch: String,
}

impl Metadata {
    pub fn collect(started: SystemTime) -> Self {
        let since = |t: SystemTime| t.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        Self {
            started_unix_seconds: since(started),
            wall_seconds: started.elapsed().map(|d| d.as_secs_f64()).unwrap_or(0.0),
            available_threads: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub status: Status,
    /// Why the run failed, when it did.
    pub reason: Option<String>,
    pub config: Value,
    /// SHA-256 of the config snapshot and of every input file.
    pub input_hashes: BTreeMap<String, String>,
    pub outputs: Value,
    /// Side files written next to the document.
    pub files: Vec<String>,
    pub metadata: Metadata,
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}
