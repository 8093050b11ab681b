//! Run manifests: every command that writes outputs records what produced
//! them — the command line, a hash of the resolved configuration, the
//! seeds, and SHA-256 digests of every input file.
//!
//! Data files are written atomically (temp name, then rename) and never
//! contain wall-clock values, so output directories stay byte-identical
//! across reruns with the same inputs and seeds; the manifest is the one
//! file that carries a timestamp, and it is written last, after every data
//! file it describes. The only command that intentionally leaves files
//! without a manifest mid-run is `evaluate`, whose append-only trial log
//! is the crash-resume artifact.

use crate::CliError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Provenance record written alongside every output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// Schema version of the data artifacts in this directory.
    pub artifact_version: u32,
    /// Binary name and version that produced the outputs.
    pub tool: String,
    pub command_line: Vec<String>,
    /// SHA-256 of the resolved effective configuration (JSON).
    pub config_hash: String,
    /// Named seeds the run drew randomness from.
    pub seeds: BTreeMap<String, u64>,
    /// Input path → SHA-256 of its bytes.
    pub input_digests: BTreeMap<String, String>,
    /// Files this run wrote, relative to the manifest's directory.
    pub outputs: Vec<String>,
    /// Unix epoch seconds at manifest write time.
    pub created_unix: u64,
}

impl RunManifest {
    pub fn new(
        config: &serde_json::Value,
        seeds: BTreeMap<String, u64>,
        input_digests: BTreeMap<String, String>,
        outputs: Vec<String>,
    ) -> Self {
        Self {
            artifact_version: neuroprobe::analysis::ANALYSIS_SCHEMA_VERSION,
            tool: format!("neuroprobe {}", env!("CARGO_PKG_VERSION")),
            command_line: std::env::args().collect(),
            config_hash: sha256_bytes(config.to_string().as_bytes()),
            seeds,
            input_digests,
            outputs,
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    /// Write `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join("manifest.json");
        self.write_at(&path)?;
        Ok(path)
    }

    /// Write `<data_file>.manifest.json` next to a single-file output.
    pub fn write_for_file(&self, data_file: &Path) -> Result<PathBuf, CliError> {
        let mut name = data_file.as_os_str().to_os_string();
        name.push(".manifest.json");
        let path = PathBuf::from(name);
        self.write_at(&path)?;
        Ok(path)
    }

    fn write_at(&self, path: &Path) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(path, &bytes)
    }
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(sha256_bytes(&bytes))
}

/// Write a file atomically: temp sibling, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}

/// Create `dir` if needed; refuse to write into a directory that already
/// has contents, so each run gets an identifiable output set.
pub fn ensure_fresh_dir(dir: &Path) -> Result<(), CliError> {
    match std::fs::read_dir(dir) {
        Ok(mut entries) => {
            if entries.next().is_some() {
                return Err(CliError::OutDirNotEmpty {
                    path: dir.to_path_buf(),
                });
            }
            Ok(())
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
                path: dir.to_path_buf(),
                source,
            })
        }
        Err(source) => Err(CliError::Io {
            path: dir.to_path_buf(),
            source,
        }),
    }
}
