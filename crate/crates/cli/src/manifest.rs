//! Run manifests: what a command read, wrote and was configured with.
//!
//! Two runs whose manifests agree apart from `timings_ms` produced
//! byte-identical outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lvfeeder::ingestion::files::{read_json, write_json};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the directory the manifest describes, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    /// The effective configuration, after command-line overrides.
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub timings_ms: BTreeMap<String, f64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("i/o error on {}: {e}", path.display()))
}

pub fn digest_file(root: &Path, path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    Ok(FileDigest {
        path: relative(root, path),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

/// Digests every file under `root` whose relative path passes `keep`, sorted by path.
pub fn digest_tree(root: &Path, keep: impl Fn(&str) -> bool) -> Result<Vec<FileDigest>> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| io_error(&dir, e))? {
            let path = entry.map_err(|e| io_error(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if keep(&relative(root, &path)) {
                files.push(path);
            }
        }
    }
    let mut out = files.iter().map(|p| digest_file(root, p)).collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

/// Inputs of a dataset directory: everything except manifests and ground truth.
pub fn dataset_inputs(dir: &Path) -> Result<Vec<FileDigest>> {
    digest_tree(dir, |p| {
        !p.ends_with(MANIFEST_FILE) && !p.starts_with("truth/") && !p.split('/').any(|c| c.starts_with('.'))
    })
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, config: &C) -> Result<Self> {
        let value = serde_json::to_value(config).map_err(|e| CliError::Config(format!("config: {e}")))?;
        let canonical = serde_json::to_vec(&value).map_err(|e| CliError::Config(format!("config: {e}")))?;
        Ok(RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_sha256: sha256_hex(&canonical),
            config: value,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings_ms: BTreeMap::new(),
        })
    }

    /// Runs `f`, recording its wall time under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings_ms.insert(stage.to_string(), t.elapsed().as_secs_f64() * 1e3);
        out
    }

    /// The manifest with timings cleared, for comparing runs.
    pub fn without_timings(&self) -> Self {
        RunManifest {
            timings_ms: BTreeMap::new(),
            ..self.clone()
        }
    }

    /// Digests `outputs` and writes the manifest into `out`.
    pub fn finish(mut self, out: &Path, outputs: &[PathBuf]) -> Result<Self> {
        let mut digests = outputs.iter().map(|p| digest_file(out, p)).collect::<Result<Vec<_>>>()?;
        digests.sort_by(|a, b| a.path.cmp(&b.path));
        self.outputs = digests;
        write_json(&out.join(MANIFEST_FILE), &self)?;
        Ok(self)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Ok(read_json(&dir.join(MANIFEST_FILE))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_abc() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn tree_digests_are_sorted_and_relative() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("b")).unwrap();
        fs::write(dir.path().join("b/x.csv"), "1").unwrap();
        fs::write(dir.path().join("a.json"), "{}").unwrap();
        fs::write(dir.path().join(MANIFEST_FILE), "{}").unwrap();
        let d = dataset_inputs(dir.path()).unwrap();
        let paths: Vec<&str> = d.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, ["a.json", "b/x.csv"]);
        assert_eq!(d[1].bytes, 1);
    }
}
