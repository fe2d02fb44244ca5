//! Run configuration echo, artifact hashing, and atomic output writing.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Echo of the resolved command line, embedded in the manifest so a run can
/// be reproduced from its outputs alone.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub class: String,
    pub stages: usize,
    pub depth: usize,
    pub samples: usize,
    pub trials: u64,
    pub seed: u64,
    pub out_dir: String,
    pub format: String,
    pub element_cap: usize,
}

/// Names of the deterministic tie-breaking policies baked into the engines.
#[derive(Debug, Clone, Serialize)]
pub struct Policies {
    pub witness: &'static str,
    pub duplicate: &'static str,
    pub extension: &'static str,
    pub split: &'static str,
}

pub const POLICIES: Policies = Policies {
    witness: "smallest-free-letter-under-halving-guard",
    duplicate: "uniform-collision-bound",
    extension: "top-atom-leftmost-anchors",
    split: "declared-order-when-boundary-admits",
};

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub artifact_version: &'static str,
    pub config: RunConfig,
    pub policies: Policies,
    pub timing_seconds: f64,
    pub rows: usize,
    pub failures: usize,
    pub pass: bool,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write via a temporary file in the same directory so readers never observe
/// a partially written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("part");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Output directory that records a content hash for every file it writes.
pub struct OutDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.root.join(name), bytes)?;
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    /// Write `manifest.json` (which lists every earlier file) and return the
    /// recorded entries.
    pub fn finish(
        self,
        config: RunConfig,
        timing_seconds: f64,
        rows: usize,
        failures: usize,
    ) -> Result<Vec<FileEntry>> {
        let manifest = RunManifest {
            artifact_version: env!("CARGO_PKG_VERSION"),
            config,
            policies: POLICIES,
            timing_seconds,
            rows,
            failures,
            pass: failures == 0,
            files: self.files.clone(),
        };
        let body = serde_json::to_string_pretty(&manifest)?;
        write_atomic(&self.root.join("manifest.json"), body.as_bytes())?;
        Ok(self.files)
    }
}
