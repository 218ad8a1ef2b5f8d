//! Run manifests: every output file gets a sidecar recording the command,
//! inputs, parameters, seed and tool version that produced it.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    /// SHA-256 of the canonical instance JSON, when an instance is involved.
    pub instance_hash: Option<String>,
    pub method: Option<String>,
    pub parameters: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub created_at: String,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            config_path: None,
            instance_hash: None,
            method: None,
            parameters: BTreeMap::new(),
            seed: None,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_at: chrono::Utc::now().to_rfc3339(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_instance(mut self, instance_json: &str) -> Self {
        self.instance_hash = Some(sha256_hex(instance_json.as_bytes()));
        self
    }

    /// Writes `<path>.manifest.json` next to the output it describes.
    pub fn write_sidecar(&self, output: &Path) -> std::io::Result<()> {
        let mut sidecar = output.as_os_str().to_owned();
        sidecar.push(".manifest.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(sidecar, text)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
