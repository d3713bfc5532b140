use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use diglab::nn::snapshot::sha256_hex;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

/// What was run, in enough detail to run it again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Invocation {
    Train,
    Experiment { which: String, seeds: Vec<u64> },
    Compare { regularizers: Vec<String>, seeds: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub invocation: Invocation,
    pub seed: u64,
    /// Fully resolved config, `key = value` per line.
    pub config: String,
    /// Files this run read from a previous run.
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    /// sha256 of each parameter snapshot, keyed by path.
    pub snapshot_hashes: BTreeMap<String, String>,
    pub diverged: Vec<String>,
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Writes files under one root and remembers their hashes.
#[derive(Debug)]
pub struct OutputDir {
    pub root: PathBuf,
    pub files: Vec<FileHash>,
}

impl OutputDir {
    pub fn new(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, rel: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.push(FileHash {
            path: rel.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(())
    }

    pub fn merge(&mut self, other: OutputDir) {
        self.files.extend(other.files);
    }

    pub fn sorted_files(&self) -> Vec<FileHash> {
        let mut f = self.files.clone();
        f.sort_by(|a, b| a.path.cmp(&b.path));
        f
    }
}

pub fn hash_file(root: &Path, rel: &str) -> Result<FileHash, CliError> {
    let path = root.join(rel);
    let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(FileHash {
        path: rel.to_string(),
        sha256: sha256_hex(&bytes),
    })
}
