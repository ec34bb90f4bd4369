//! Run manifests and atomic output writes.
//!
//! A manifest records everything that determines a command's outputs: the
//! arguments, a SHA-256 digest of every input file, the effective
//! parameters and seed. It carries no timestamps, so two runs of the same
//! command over the same inputs produce byte-identical manifests as well.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{code, CliError, CliResult};

pub const TOOL: &str = "hhtmotion";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Command-line arguments after the program name; `replay` re-runs them.
    pub args: Vec<String>,
    /// Input path to lowercase hex SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    pub parameters: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, args: &[String]) -> Self {
        Self {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args: args.to_vec(),
            inputs: BTreeMap::new(),
            parameters: serde_json::Value::Null,
            seed: None,
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.insert(path.display().to_string(), digest(bytes));
    }

    /// Checks that every recorded input still has its recorded digest.
    pub fn verify_inputs(&self) -> CliResult<()> {
        for (path, want) in &self.inputs {
            let bytes = fs::read(path).map_err(|e| CliError::io(Path::new(path), e))?;
            if &digest(&bytes) != want {
                return Err(CliError::new(code::FAILURE, format!("{path}: contents changed since the recorded run")));
            }
        }
        Ok(())
    }

    /// Writes the manifest next to the primary output.
    pub fn write_for(&self, primary: &Path) -> CliResult<PathBuf> {
        let path = manifest_path(primary);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

pub fn manifest_path(primary: &Path) -> PathBuf {
    suffixed(primary, ".manifest.json")
}

/// `path` with `suffix` appended to its file name.
pub fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}
