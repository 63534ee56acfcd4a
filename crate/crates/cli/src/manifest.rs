//! Run manifest: per stage, its version, seeds, and the content hash of every
//! input and output file. Paths inside the output root are stored relative to
//! it so that two runs in different directories can be compared byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Complete,
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub version: u32,
    pub status: StageStatus,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    /// Hash of the effective configuration, output root excluded.
    pub config_sha256: String,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    pub fn new(config_sha256: String) -> Self {
        Manifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256,
            stages: Vec::new(),
        }
    }

    /// Replaces the record with the same stage name, or appends it.
    pub fn record(&mut self, rec: StageRecord) {
        match self.stages.iter_mut().find(|s| s.name == rec.name) {
            Some(slot) => *slot = rec,
            None => self.stages.push(rec),
        }
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn load(out_dir: &Path) -> Result<Option<Self>> {
        let path = out_dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::stage("manifest", e))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::stage("manifest", e))
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(out_dir).map_err(|e| CliError::stage("manifest", e))?;
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::stage("manifest", e))?;
        text.push('\n');
        std::fs::write(out_dir.join(MANIFEST_FILE), text).map_err(|e| CliError::stage("manifest", e))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of a file; a missing file hashes as `missing`.
pub fn file_record(path: &Path, out_dir: &Path) -> FileRecord {
    let sha256 = match std::fs::read(path) {
        Ok(bytes) => sha256_hex(&bytes),
        Err(_) => "missing".to_string(),
    };
    FileRecord {
        path: display_path(path, out_dir),
        sha256,
    }
}

/// Relative to `out_dir` when inside it, otherwise as given.
pub fn display_path(path: &Path, out_dir: &Path) -> String {
    let rel: PathBuf = path.strip_prefix(out_dir).map(Path::to_path_buf).unwrap_or_else(|_| path.to_path_buf());
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_replaces_by_name() {
        let rec = |status| StageRecord {
            name: "ingest".into(),
            version: 1,
            status,
            seeds: BTreeMap::new(),
            inputs: vec![],
            outputs: vec![],
            error: None,
        };
        let mut m = Manifest::new("x".into());
        m.record(rec(StageStatus::Incomplete));
        m.record(rec(StageStatus::Complete));
        assert_eq!(m.stages.len(), 1);
        assert_eq!(m.stage("ingest").unwrap().status, StageStatus::Complete);
    }

    #[test]
    fn paths_and_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a").join("b.txt");
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(&p, "abc").unwrap();
        let r = file_record(&p, dir.path());
        assert_eq!(r.path, "a/b.txt");
        assert_eq!(r.sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(file_record(&dir.path().join("nope"), dir.path()).sha256, "missing");
    }
}
