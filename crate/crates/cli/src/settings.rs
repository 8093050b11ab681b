//! Layered configuration: flags > `NEUROPROBE_*` environment variables >
//! `--config` JSON file > built-in defaults.
//!
//! Each key is looked up independently, so a config file can pin the seed
//! while the bootstrap count still comes from a flag. The resolved values
//! a command actually ran with are hashed into its manifest.

use crate::CliError;
use std::collections::BTreeMap;
use std::path::Path;

/// Resolves configuration keys against the env and an optional config file.
pub struct Resolver {
    file: BTreeMap<String, serde_json::Value>,
}

fn env_key(key: &str) -> String {
    format!("NEUROPROBE_{}", key.to_uppercase())
}

impl Resolver {
    pub fn new(config: Option<&Path>) -> Result<Self, CliError> {
        let file = match config {
            None => BTreeMap::new(),
            Some(path) => {
                let bytes = std::fs::read(path).map_err(|source| CliError::Io {
                    path: path.to_path_buf(),
                    source,
                })?;
                serde_json::from_slice(&bytes).map_err(|e| CliError::InvalidConfig {
                    what: format!("config file {}: {e}", path.display()),
                })?
            }
        };
        Ok(Self { file })
    }

    fn env_raw(&self, key: &str) -> Option<String> {
        std::env::var(env_key(key)).ok()
    }

    pub fn u64_value(&self, key: &str, flag: Option<u64>, default: u64) -> Result<u64, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        if let Some(raw) = self.env_raw(key) {
            return raw.parse().map_err(|_| CliError::InvalidConfig {
                what: format!("{} must be an unsigned integer, got {raw:?}", env_key(key)),
            });
        }
        match self.file.get(key) {
            None => Ok(default),
            Some(v) => v.as_u64().ok_or_else(|| CliError::InvalidConfig {
                what: format!("config key {key:?} must be an unsigned integer, got {v}"),
            }),
        }
    }

    pub fn usize_value(
        &self,
        key: &str,
        flag: Option<usize>,
        default: usize,
    ) -> Result<usize, CliError> {
        let v = self.u64_value(key, flag.map(|v| v as u64), default as u64)?;
        Ok(v as usize)
    }

    pub fn string_value(&self, key: &str, flag: Option<&str>, default: &str) -> Result<String, CliError> {
        if let Some(v) = flag {
            return Ok(v.to_string());
        }
        if let Some(raw) = self.env_raw(key) {
            return Ok(raw);
        }
        match self.file.get(key) {
            None => Ok(default.to_string()),
            Some(serde_json::Value::String(s)) => Ok(s.clone()),
            Some(v) => Err(CliError::InvalidConfig {
                what: format!("config key {key:?} must be a string, got {v}"),
            }),
        }
    }
}
