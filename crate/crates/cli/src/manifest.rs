//! Run manifests: every command writes one next to its primary output,
//! recording the argv, the resolved configuration, input/output digests
//! and timestamps, so any run can be replayed and checked byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::errors::CliError;

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Full argv of the run, binary path included.
    pub command: Vec<String>,
    pub resolved_config: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub code_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

pub struct ManifestBuilder {
    subcommand: String,
    resolved: BTreeMap<String, String>,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started_at: String,
}

impl ManifestBuilder {
    pub fn new(subcommand: &str) -> Self {
        ManifestBuilder {
            subcommand: subcommand.to_string(),
            resolved: BTreeMap::new(),
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_at: now_rfc3339(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.resolved.insert(key.to_string(), value.to_string());
        self
    }

    pub fn set_opt(&mut self, key: &str, value: Option<impl ToString>) -> &mut Self {
        if let Some(v) = value {
            self.set(key, v);
        }
        self
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.seed = Some(seed);
        self.set("seed", seed)
    }

    pub fn input(&mut self, path: &Path) -> &mut Self {
        self.inputs.push(path.to_path_buf());
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.to_path_buf());
        self
    }

    /// Digests all recorded files and writes the manifest JSON.
    pub fn write(&self, manifest_path: &Path) -> Result<(), CliError> {
        let digest_all = |paths: &[PathBuf]| -> Result<Vec<FileDigest>, CliError> {
            paths
                .iter()
                .map(|p| {
                    Ok(FileDigest {
                        path: p.display().to_string(),
                        sha256: sha256_hex(p)?,
                    })
                })
                .collect()
        };
        let manifest = RunManifest {
            subcommand: self.subcommand.clone(),
            command: std::env::args().collect(),
            resolved_config: self.resolved.clone(),
            seed: self.seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: self.started_at.clone(),
            finished_at: now_rfc3339(),
            inputs: digest_all(&self.inputs)?,
            outputs: digest_all(&self.outputs)?,
        };
        let mut w = BufWriter::new(File::create(manifest_path)?);
        serde_json::to_writer_pretty(&mut w, &manifest).map_err(std::io::Error::from)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

/// Default manifest location: the primary output path plus
/// `.manifest.json`.
pub fn manifest_path_for(primary_output: &Path) -> PathBuf {
    let mut name = primary_output.as_os_str().to_os_string();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn sha256_hex(path: &Path) -> Result<String, CliError> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        let _ = write!(hex, "{byte:02x}");
    }
    Ok(hex)
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
