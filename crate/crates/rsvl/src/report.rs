//! JSON report envelope shared by every subcommand.
//!
//! Everything except `metadata` is a pure function of the configuration and
//! input bytes, so two runs with the same inputs and seed produce identical
//! `command`, `report` and `provenance` blocks.

use std::fs;
use std::io;
use std::path::Path;
use std::time::SystemTime;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    /// What the file is used as, e.g. `"images"`.
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the canonical JSON encoding of the resolved parameters.
    pub config_hash: String,
    pub seed: Option<u64>,
    pub parameters: serde_json::Value,
    pub inputs: Vec<InputDigest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub generated_at: String,
}

impl Metadata {
    pub fn now() -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            generated_at: humantime::format_rfc3339_seconds(SystemTime::now()).to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub command: String,
    pub report: T,
    pub provenance: Provenance,
    pub metadata: Metadata,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Hash of the parameters as serialized by `serde_json` (struct fields in
/// declaration order, maps sorted).
pub fn config_hash(parameters: &serde_json::Value) -> String {
    sha256_hex(&serde_json::to_vec(parameters).expect("JSON value serializes"))
}

impl Provenance {
    pub fn new<P: Serialize>(parameters: &P, seed: Option<u64>, inputs: Vec<InputDigest>) -> Self {
        let parameters = serde_json::to_value(parameters).expect("parameters serialize to JSON");
        Self {
            config_hash: config_hash(&parameters),
            seed,
            parameters,
            inputs,
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}
