//! Run manifests: what went in, what came out, and content hashes of both.
//!
//! Manifests carry no timestamps or host details, so identical runs produce
//! identical manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use latentage_core::format::{meta_path, scaler_path};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub role: String,
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: PipelineConfig,
    /// Effective values after defaults were applied.
    pub params: BTreeMap<String, Value>,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Hash of inputs and settings, used to decide whether a partial run can resume.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complete: Option<bool>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> io::Result<(u64, String)> {
    let bytes = fs::read(path)?;
    Ok((bytes.len() as u64, sha256_hex(&bytes)))
}

impl Manifest {
    pub fn new(command: &str, config: &PipelineConfig) -> Self {
        Self {
            tool: "latentage".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config.clone(),
            params: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
            fingerprint: None,
            complete: None,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("parameter serializes");
        self.params.insert(key.into(), v);
    }

    pub fn input(&mut self, role: &str, path: &Path) -> io::Result<()> {
        let entry = entry(role, path)?;
        self.inputs.push(entry);
        Ok(())
    }

    pub fn output(&mut self, role: &str, path: &Path) -> io::Result<()> {
        let entry = entry(role, path)?;
        self.outputs.push(entry);
        Ok(())
    }

    /// A latent file plus whichever sidecars exist next to it.
    pub fn latents_input(&mut self, role: &str, path: &Path) -> io::Result<()> {
        for (r, p) in latent_files(role, path) {
            self.input(&r, &p)?;
        }
        Ok(())
    }

    pub fn latents_output(&mut self, role: &str, path: &Path) -> io::Result<()> {
        for (r, p) in latent_files(role, path) {
            self.output(&r, &p)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.to_json())
    }
}

fn entry(role: &str, path: &Path) -> io::Result<FileEntry> {
    let (bytes, sha256) = hash_file(path)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    Ok(FileEntry {
        role: role.into(),
        path: path.to_path_buf(),
        bytes,
        sha256,
    })
}

fn latent_files(role: &str, path: &Path) -> Vec<(String, PathBuf)> {
    let mut files = vec![(role.to_string(), path.to_path_buf())];
    for (suffix, p) in [("meta", meta_path(path)), ("scaler", scaler_path(path))] {
        if p.exists() {
            files.push((format!("{role}.{suffix}"), p));
        }
    }
    files
}

/// `<out>.manifest.json` next to a file output.
pub fn beside(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
