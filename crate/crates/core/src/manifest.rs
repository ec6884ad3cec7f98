//! Run manifests: everything needed to reproduce an output file.
//!
//! The manifest hash covers the resolved configuration, seeds, run settings
//! and the content hashes of input files. Command line and timestamps are
//! recorded but left out of the hash, so re-running the same manifest yields
//! the same hash and byte-identical outputs.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::EnvConfig;
use crate::error::Result;
use crate::training::TrainConfig;

pub const MANIFEST_FORMAT: &str = "hitmac-manifest/1";

/// Git-style object hash: SHA-256 over `"blob <len>\0"` followed by the bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

pub fn file_hash(path: impl AsRef<Path>) -> Result<String> {
    Ok(content_hash(&std::fs::read(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub hash: String,
    pub command: Vec<String>,
    pub env: EnvConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    pub seeds: Vec<u64>,
    /// Free-form run settings such as policy name, episode count or sweep.
    pub settings: IndexMap<String, serde_json::Value>,
    /// Input file path to content hash.
    pub inputs: IndexMap<String, String>,
    pub created_unix: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_unix: Option<u64>,
}

#[derive(Serialize)]
struct Hashed<'a> {
    format: &'a str,
    env: &'a EnvConfig,
    train: &'a Option<TrainConfig>,
    seeds: &'a [u64],
    settings: &'a IndexMap<String, serde_json::Value>,
    inputs: Vec<&'a String>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: Vec<String>, env: EnvConfig, train: Option<TrainConfig>, seeds: Vec<u64>) -> Self {
        let mut m = Self {
            format: MANIFEST_FORMAT.into(),
            hash: String::new(),
            command,
            env,
            train,
            seeds,
            settings: IndexMap::new(),
            inputs: IndexMap::new(),
            created_unix: now(),
            finished_unix: None,
        };
        m.rehash();
        m
    }

    pub fn with_setting(mut self, key: &str, value: impl Serialize) -> Result<Self> {
        self.settings.insert(key.to_owned(), serde_json::to_value(value)?);
        self.rehash();
        Ok(self)
    }

    /// Records an input file by its content hash.
    pub fn with_input(mut self, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        self.inputs.insert(path.display().to_string(), file_hash(path)?);
        self.rehash();
        Ok(self)
    }

    /// Recomputes the hash from the reproducibility-relevant fields.
    ///
    /// Inputs enter by content only, so moving a checkpoint does not change it.
    pub fn compute_hash(&self) -> String {
        let mut inputs: Vec<&String> = self.inputs.values().collect();
        inputs.sort();
        let hashed = Hashed {
            format: &self.format,
            env: &self.env,
            train: &self.train,
            seeds: &self.seeds,
            settings: &self.settings,
            inputs,
        };
        let bytes = serde_json::to_vec(&hashed).expect("manifest fields serialize");
        content_hash(&bytes)
    }

    fn rehash(&mut self) {
        self.hash = self.compute_hash();
    }

    pub fn finish(&mut self) {
        self.finished_unix = Some(now());
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn git_blob_hash() {
        // `printf 'blob 6\0hello\n' | sha256sum`
        assert_eq!(
            content_hash(b"hello\n"),
            "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4"
        );
    }

    #[test]
    fn hash_ignores_command_and_time() {
        let a = RunManifest::new(vec!["a".into()], EnvConfig::default(), None, vec![1]);
        let mut b = RunManifest::new(vec!["b".into(), "c".into()], EnvConfig::default(), None, vec![1]);
        b.created_unix += 100;
        b.finish();
        assert_eq!(a.hash, b.hash);
        assert_eq!(a.hash, a.compute_hash());
    }

    #[test]
    fn hash_tracks_configuration() {
        let a = RunManifest::new(vec![], EnvConfig::default(), None, vec![1]);
        let b = RunManifest::new(vec![], EnvConfig::default(), None, vec![2]);
        let c = RunManifest::new(vec![], EnvConfig::default().with_counts(2, 3), None, vec![1]);
        let d = a.clone().with_setting("episodes", 20).unwrap();
        assert_ne!(a.hash, b.hash);
        assert_ne!(a.hash, c.hash);
        assert_ne!(a.hash, d.hash);
    }

    #[test]
    fn inputs_hash_by_content() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("one.json");
        let p2 = dir.path().join("two.json");
        std::fs::write(&p1, "{}").unwrap();
        std::fs::write(&p2, "{}").unwrap();
        let base = RunManifest::new(vec![], EnvConfig::default(), None, vec![0]);
        let a = base.clone().with_input(&p1).unwrap();
        let b = base.clone().with_input(&p2).unwrap();
        assert_eq!(a.hash, b.hash);
        assert_ne!(a.hash, base.hash);

        let path = dir.path().join("manifest.json");
        a.save(&path).unwrap();
        assert_eq!(RunManifest::load(&path).unwrap(), a);
    }
}
