use std::fs;
use std::path::{Path, PathBuf};

use batchlpn::verify::sha256_hex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::files::{io_err, read_text, write_atomic, CliError, Result};
use crate::Command;

/// Report fields that vary between otherwise identical runs.
pub const VOLATILE_FIELDS: &[&str] = &["runtime_seconds"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
    /// Fields zeroed before hashing.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excludes: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub invocation: Command,
    pub seed: Option<u64>,
    pub version: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn digest_file(path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(FileDigest {
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
        excludes: Vec::new(),
    })
}

fn zero_volatile(v: &mut Value) {
    match v {
        Value::Object(map) => {
            for (key, val) in map.iter_mut() {
                if VOLATILE_FIELDS.contains(&key.as_str()) {
                    *val = Value::from(0.0);
                } else {
                    zero_volatile(val);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(zero_volatile),
        _ => {}
    }
}

/// Digest of a JSON report with wall-clock fields zeroed.
pub fn digest_report(path: &Path) -> Result<FileDigest> {
    let mut value: Value = serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Line {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    zero_volatile(&mut value);
    Ok(FileDigest {
        path: path.to_path_buf(),
        sha256: sha256_hex(value.to_string().as_bytes()),
        excludes: VOLATILE_FIELDS.iter().map(|s| s.to_string()).collect(),
    })
}

impl RunManifest {
    pub fn write(&self, out: &Path) -> Result<PathBuf> {
        let path = manifest_path(out);
        write_atomic(&path, &serde_json::to_string_pretty(self).expect("manifest serializes"))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Line {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}
