use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written beside every output. Everything except
/// `wall_seconds` is a function of the flags and input bytes.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub threads: Option<usize>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_seconds: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Path of the sidecar `<path><suffix>`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Accumulates inputs and outputs of one command run.
pub struct Recorder {
    command: String,
    args: serde_json::Value,
    threads: Option<usize>,
    seeds: BTreeMap<String, u64>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    started: Instant,
}

impl Recorder {
    /// `args` minus its `out` field feeds the config hash, so the hash names a
    /// configuration independently of where the results go.
    pub fn new(command: &str, args: &impl Serialize, threads: Option<usize>) -> Self {
        let mut args = serde_json::to_value(args).expect("arguments serialize");
        if let Some(map) = args.as_object_mut() {
            map.remove("out");
        }
        Self {
            command: command.to_string(),
            args,
            threads,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_string(), value);
    }

    pub fn read(&mut self, path: &Path) -> Result<String, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push(FileDigest { path: path.display().to_string(), sha256: sha256_hex(text.as_bytes()) });
        Ok(text)
    }

    pub fn write(&mut self, path: &Path, contents: &str) -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        fs::write(path, contents).map_err(|e| CliError::io(path, e))?;
        self.outputs.push(FileDigest { path: path.display().to_string(), sha256: sha256_hex(contents.as_bytes()) });
        Ok(())
    }

    /// Writes the manifest to `<primary>.manifest.json`.
    pub fn finish(self, primary: &Path) -> Result<(), CliError> {
        let mut h = Sha256::new();
        h.update(self.command.as_bytes());
        h.update(serde_json::to_vec(&self.args).expect("arguments serialize"));
        for d in &self.inputs {
            h.update(d.sha256.as_bytes());
        }
        let manifest = RunManifest {
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: hex::encode(h.finalize()),
            seeds: self.seeds,
            threads: self.threads,
            inputs: self.inputs,
            outputs: self.outputs,
            wall_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = sidecar(primary, ".manifest.json");
        let text = icnn_opf::jsonfmt::to_document(&manifest).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}
