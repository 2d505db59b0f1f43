use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Record of one run. The checksums cover every output except the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub wall_clock_seconds: f64,
    pub threads: usize,
    /// File name to `sha256` hex digest.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    /// Digest over the sorted output checksums.
    pub fn combined_checksum(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for (k, v) in &self.outputs {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

pub fn versions() -> BTreeMap<String, String> {
    let mut v = BTreeMap::new();
    v.insert("flowlab".into(), env!("CARGO_PKG_VERSION").into());
    v.insert("flowlab-core".into(), flowlab_core::VERSION.into());
    v
}
