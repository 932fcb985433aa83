//! Run manifests. Every command finishes by dropping a `manifest.json`
//! into its output directory: the command name, the effective flag values,
//! SHA-256 checksums of all inputs, and the artifact list. The manifest is
//! the replay recipe for the run, so it contains no timestamps or host
//! details, only content.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{io_ctx, CliError};

#[derive(Debug, Serialize)]
pub struct Manifest {
    command: String,
    package: &'static str,
    version: &'static str,
    seed: Option<u64>,
    config: BTreeMap<String, Value>,
    /// Input path -> SHA-256 of its bytes.
    inputs: BTreeMap<String, String>,
    /// Artifact file names written next to this manifest, sorted.
    outputs: Vec<String>,
    /// Derived facts worth echoing (corpus sizes, learned values).
    notes: BTreeMap<String, Value>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest {
            command: command.to_string(),
            package: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            seed: None,
            config: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            notes: BTreeMap::new(),
        }
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.seed = Some(seed);
        self
    }

    pub fn config(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.config.insert(key.to_string(), value.into());
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self, CliError> {
        let digest = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(self)
    }

    pub fn output(&mut self, name: &str) -> &mut Self {
        self.outputs.push(name.to_string());
        self
    }

    pub fn note(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.notes.insert(key.to_string(), value.into());
        self
    }

    /// Serializes to `<dir>/manifest.json`. Key order is fixed by the maps,
    /// so equal runs produce equal bytes.
    pub fn write(&mut self, dir: &Path) -> Result<PathBuf, CliError> {
        self.outputs.push("manifest.json".to_string());
        self.outputs.sort();
        self.outputs.dedup();
        let path = dir.join("manifest.json");
        let mut body = serde_json::to_string_pretty(self).expect("manifest serializes");
        body.push('\n');
        fs::write(&path, body).map_err(io_ctx(path.display().to_string()))?;
        Ok(path)
    }
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut file = fs::File::open(path).map_err(io_ctx(path.display().to_string()))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(io_ctx(path.display().to_string()))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Creates the output directory if needed and rejects paths that exist as
/// files.
pub fn prepare_out_dir(dir: &Path) -> Result<(), CliError> {
    if dir.exists() && !dir.is_dir() {
        return Err(CliError::Usage(format!(
            "--out {} exists and is not a directory",
            dir.display()
        )));
    }
    fs::create_dir_all(dir).map_err(io_ctx(dir.display().to_string()))?;
    Ok(())
}
