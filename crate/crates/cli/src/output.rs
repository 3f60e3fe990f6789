use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use semisup::harness::{AggregateRow, CurveRow};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const TIMING: &str = "timing.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    /// Absent for volatile files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub volatile: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects artifacts written to one output directory.
pub struct Artifacts {
    dir: PathBuf,
    written: BTreeMap<String, (u64, Option<String>)>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Artifacts, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts {
            dir: dir.to_owned(),
            written: BTreeMap::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.written.insert(name.to_owned(), (bytes.len() as u64, Some(sha256_hex(bytes))));
        Ok(())
    }

    pub fn write_volatile(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.path(name), bytes)?;
        self.written.insert(name.to_owned(), (bytes.len() as u64, None));
        Ok(())
    }

    /// Register a file some other writer produced.
    pub fn record(&mut self, name: &str) -> Result<(), CliError> {
        let bytes = fs::read(self.path(name))?;
        self.written.insert(name.to_owned(), (bytes.len() as u64, Some(sha256_hex(&bytes))));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(self) -> Result<Manifest, CliError> {
        let manifest = Manifest {
            files: self
                .written
                .into_iter()
                .map(|(path, (bytes, sha256))| ManifestEntry {
                    path,
                    bytes,
                    volatile: sha256.is_none(),
                    sha256,
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join(MANIFEST), text)?;
        Ok(manifest)
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn scores_csv(rows: &[CurveRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["arm", "k", "restart", "score"])?;
    for r in rows {
        w.write_record([r.arm.clone(), opt(r.k), r.restart.to_string(), opt(r.score)])?;
    }
    w.into_inner().map_err(|e| CliError::runtime("io", e.to_string()))
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["arm", "k", "mean", "std"])?;
    for r in rows {
        w.write_record([r.arm.clone(), opt(r.k), opt(r.mean), opt(r.std)])?;
    }
    w.into_inner().map_err(|e| CliError::runtime("io", e.to_string()))
}
