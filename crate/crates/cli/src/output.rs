use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Writes files under the output directory and records their hashes.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<(String, String)>,
}

#[derive(Serialize)]
struct OutputEntry<'a> {
    path: &'a str,
    sha256: &'a str,
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a C,
    seeds: Seeds,
    outputs: Vec<OutputEntry<'a>>,
}

#[derive(Serialize)]
pub struct Seeds {
    pub cv: u64,
    pub synth: Option<u64>,
}

impl OutputDir {
    pub fn new(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, rel: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push((
            rel.to_string(),
            hex::encode(Sha256::digest(contents.as_bytes())),
        ));
        Ok(())
    }

    /// Writes `run_manifest.json` listing every output with its SHA-256.
    pub fn finish<C: Serialize>(
        mut self,
        command: &str,
        config: &C,
        seeds: Seeds,
    ) -> Result<(), CliError> {
        self.written.sort();
        let manifest = Manifest {
            tool: "circaphase",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            seeds,
            outputs: self
                .written
                .iter()
                .map(|(p, h)| OutputEntry { path: p, sha256: h })
                .collect(),
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Data(e.to_string()))?
            + "\n";
        let path = self.root.join("run_manifest.json");
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}
