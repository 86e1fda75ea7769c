//! Intermediate files shared between CLI stages.
//!
//! Each stage output is stored under `artifacts/` with a name derived from
//! the SHA-256 of its inputs (upstream file bytes plus the settings the
//! stage reads), so re-running a stage on the same upstream files lands on
//! the same file with the same bytes. A copy under a fixed name lets the
//! next stage find it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{write_atomic, Label};

pub const ARTIFACT_DIR: &str = "artifacts";

/// Feature rows with their column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    pub values: Vec<f64>,
}

impl FeatureTable {
    pub fn check(&self) -> Result<()> {
        for r in &self.rows {
            if r.values.len() != self.names.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.names.len(),
                    got: r.values.len(),
                });
            }
        }
        Ok(())
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.values.clone()).collect()
    }
}

/// Hex SHA-256 over length-prefixed parts.
pub fn content_key(stage: &str, parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    h.update((stage.len() as u64).to_le_bytes());
    h.update(stage.as_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Where a stage output lives once stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stored {
    pub addressed: PathBuf,
    pub named: PathBuf,
    /// The addressed file already existed and was reused.
    pub reused: bool,
}

/// Store `compute()`'s bytes at `dir/artifacts/{stage}-{key}.{ext}` unless
/// that file exists, then copy it to `dir/{name}`.
pub fn store(
    dir: &Path,
    stage: &str,
    name: &str,
    inputs: &[&[u8]],
    compute: impl FnOnce() -> Result<Vec<u8>>,
) -> Result<Stored> {
    let key = content_key(stage, inputs);
    let ext = Path::new(name).extension().and_then(|e| e.to_str()).unwrap_or("bin");
    let adir = dir.join(ARTIFACT_DIR);
    fs::create_dir_all(&adir).map_err(|e| Error::io(&adir, e))?;
    let addressed = adir.join(format!("{stage}-{}.{ext}", &key[..16]));
    let reused = addressed.exists();
    let bytes = if reused {
        read_bytes(&addressed)?
    } else {
        let b = compute()?;
        write_atomic(&addressed, &b)?;
        b
    };
    let named = dir.join(name);
    write_atomic(&named, &bytes)?;
    Ok(Stored {
        addressed,
        named,
        reused,
    })
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(value)?;
    b.push(b'\n');
    Ok(b)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&read_bytes(path)?)?)
}
