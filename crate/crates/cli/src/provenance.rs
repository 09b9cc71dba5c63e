//! Provenance sidecars and cleanup of partial outputs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::Settings;

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut hasher = Sha256::new();
    io::copy(&mut File::open(path)?, &mut hasher)?;
    Ok(hex::encode(hasher.finalize()))
}

/// Everything needed to rerun a command: the resolved configuration, seeds,
/// and the content hash of every input file.
#[derive(Debug, Default)]
pub struct RunRecord {
    pub command: &'static str,
    pub inputs: BTreeMap<String, (PathBuf, String)>,
    pub seeds: Vec<u64>,
    pub extra: BTreeMap<String, Value>,
}

impl RunRecord {
    pub fn new(command: &'static str) -> Self {
        RunRecord {
            command,
            ..Default::default()
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> io::Result<()> {
        let hash = sha256_file(path)?;
        self.inputs.insert(role.to_string(), (path.to_path_buf(), hash));
        Ok(())
    }

    /// `role → sha256` pairs, as stored in ranked-list provenance.
    pub fn input_hashes(&self) -> BTreeMap<String, String> {
        self.inputs.iter().map(|(r, (_, h))| (r.clone(), h.clone())).collect()
    }

    pub fn to_json(&self, settings: &Settings) -> Value {
        let inputs: BTreeMap<&String, Value> = self
            .inputs
            .iter()
            .map(|(role, (path, hash))| (role, json!({ "path": path.display().to_string(), "sha256": hash })))
            .collect();
        let mut v = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": settings.map(),
            "seeds": self.seeds,
            "inputs": inputs,
        });
        for (k, x) in &self.extra {
            v[k] = x.clone();
        }
        v
    }

    /// Writes `<output>.json`.
    pub fn write_sidecar(&self, settings: &Settings, output: &Path) -> io::Result<PathBuf> {
        let path = sidecar_path(output);
        let text = serde_json::to_string_pretty(&self.to_json(settings))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Tracks files a command writes and deletes them again unless the command
/// finishes and calls [`Outputs::commit`].
#[derive(Debug, Default)]
pub struct Outputs {
    paths: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn track(&mut self, path: impl Into<PathBuf>) -> PathBuf {
        let p = path.into();
        self.paths.push(p.clone());
        p
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for p in &self.paths {
            if p.exists() {
                let _ = std::fs::remove_file(p);
                log::info!("removed partial output {}", p.display());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncommitted_outputs_are_removed() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        {
            let mut o = Outputs::new();
            std::fs::write(o.track(&a), "x").unwrap();
        }
        assert!(!a.exists());
        let mut o = Outputs::new();
        std::fs::write(o.track(&b), "x").unwrap();
        o.commit();
        assert!(b.exists());
    }

    #[test]
    fn hashes_and_sidecar_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("in.txt");
        std::fs::write(&p, "abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(sidecar_path(Path::new("out/r.tsv")), Path::new("out/r.tsv.json"));
    }
}
