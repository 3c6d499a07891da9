//! Per-invocation manifest: the only artifact that carries timestamps.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TOOL_NAME: &str = "strokebench";

#[derive(Debug, Clone, Serialize)]
pub struct InputInfo {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_digest: String,
    pub master_seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub run_seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<InputInfo>,
    pub started_at: String,
    pub wall_time_seconds: f64,
    pub artifacts: Vec<String>,
    pub config: serde_json::Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest of the effective configuration's canonical JSON.
pub fn config_digest(config: &serde_json::Value) -> String {
    sha256_hex(serde_json::to_string(config).unwrap_or_default().as_bytes())
}
