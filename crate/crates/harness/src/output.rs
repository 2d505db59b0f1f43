use crate::error::{HarnessError, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Output directory that records a checksum for every file it writes.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    config_hash: String,
    checksums: BTreeMap<String, String>,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl OutputDir {
    pub fn create(root: &Path, config_hash: &str) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(io(root))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            config_hash: config_hash.to_string(),
            checksums: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn checksums(&self) -> &BTreeMap<String, String> {
        &self.checksums
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        std::fs::write(&path, bytes).map_err(io(&path))?;
        self.checksums.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    /// JSON report with `config_hash` added at the top level.
    pub fn write_json<T: Serialize>(&mut self, name: &str, report: &T) -> Result<()> {
        let mut v = serde_json::to_value(report).expect("report serializes");
        match &mut v {
            serde_json::Value::Object(map) => {
                map.insert("config_hash".into(), self.config_hash.clone().into());
            }
            other => {
                *other = serde_json::json!({ "config_hash": self.config_hash, "value": other.clone() });
            }
        }
        let mut text = serde_json::to_string_pretty(&v).expect("report serializes");
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// CSV with a header row; numbers use the shortest round-trip form.
    pub fn write_csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let path = self.root.join(name);
        let err = |e: csv::Error| HarnessError::Csv {
            path: path.clone(),
            message: e.to_string(),
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.write_record(r).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Csv {
            path: path.clone(),
            message: e.to_string(),
        })?;
        self.write_bytes(name, &bytes)
    }
}

/// Column names `prefix0, prefix1, …`.
pub fn indexed(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn nums(v: &[f64]) -> impl Iterator<Item = String> + '_ {
    v.iter().map(|x| num(*x))
}
