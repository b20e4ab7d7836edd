//! Shared CLI plumbing: logging, config hashing, artifact file types.

use std::collections::BTreeMap;
use std::path::Path;

use cadgraph::error::{Error, Result};
use cadgraph::nn::checkpoint;
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd)]
pub enum Level {
    Quiet,
    Info,
    Debug,
}

pub struct Logger {
    level: Level,
}

impl Logger {
    pub fn from_env() -> Logger {
        let level = match std::env::var("CADGRAPH_LOG").as_deref() {
            Ok("quiet") => Level::Quiet,
            Ok("debug") => Level::Debug,
            _ => Level::Info,
        };
        Logger { level }
    }

    pub fn info(&self, msg: impl AsRef<str>) {
        if self.level >= Level::Info {
            eprintln!("{}", msg.as_ref());
        }
    }

    pub fn debug(&self, msg: impl AsRef<str>) {
        if self.level >= Level::Debug {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// Hex SHA-256 of the resolved command configuration (serialized JSON).
pub fn config_hash_hex<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(checkpoint::content_hash(&bytes))
}

/// First 32 bytes of a hex hash, for binary headers.
pub fn hash_bytes(hex: &str) -> [u8; 32] {
    let mut out = [0u8; 32];
    for (i, chunk) in hex.as_bytes().chunks(2).take(32).enumerate() {
        let s = std::str::from_utf8(chunk).unwrap_or("00");
        out[i] = u8::from_str_radix(s, 16).unwrap_or(0);
    }
    out
}

/// Ground-truth labels: either family assignments (synthetic datasets) or
/// explicit per-query relevance levels (0 | 1 | 2).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LabelsFile {
    pub format_version: u32,
    #[serde(default)]
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub families: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub relevance: BTreeMap<String, BTreeMap<String, u8>>,
}

impl LabelsFile {
    pub fn load(path: &Path) -> Result<LabelsFile> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MembershipsFile {
    pub assemblies: Vec<cadgraph::retrieval::AssemblyRecord>,
}

impl MembershipsFile {
    pub fn load(path: &Path) -> Result<MembershipsFile> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path.display().to_string(), e))
}
