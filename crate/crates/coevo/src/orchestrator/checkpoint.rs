//! Self-describing JSON checkpoints.
//!
//! The file records a schema version, a hash of the run config it belongs
//! to, and a SHA-256 of the payload so truncation or tampering is caught
//! on load.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use coevo_core::config::RunConfig;

use super::RunState;
use crate::error::{Error, Result};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub config_hash: String,
    pub payload_sha256: String,
    pub payload: serde_json::Value,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hex SHA-256 of the config's canonical JSON form.
pub fn config_hash(cfg: &RunConfig) -> String {
    let value = serde_json::to_value(cfg).expect("config serializes");
    sha256_hex(value.to_string().as_bytes())
}

impl Checkpoint {
    pub fn new(cfg: &RunConfig, state: &RunState) -> Result<Self> {
        let payload = serde_json::to_value(state).map_err(|e| Error::Integrity(e.to_string()))?;
        Ok(Self {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            config_hash: config_hash(cfg),
            payload_sha256: sha256_hex(payload.to_string().as_bytes()),
            payload,
        })
    }

    /// Write atomically: a temporary file renamed over the target.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        let text =
            serde_json::to_string_pretty(self).map_err(|e| Error::Integrity(e.to_string()))?;
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)
            .map_err(|e| Error::Integrity(format!("unreadable checkpoint: {e}")))?;
        if ck.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::Integrity(format!(
                "checkpoint schema {} is not supported (expected {CHECKPOINT_SCHEMA_VERSION})",
                ck.schema_version
            )));
        }
        if sha256_hex(ck.payload.to_string().as_bytes()) != ck.payload_sha256 {
            return Err(Error::Integrity("payload checksum mismatch".into()));
        }
        Ok(ck)
    }

    /// The run state, provided the checkpoint was made under `cfg`.
    pub fn state_for(&self, cfg: &RunConfig) -> Result<RunState> {
        if self.config_hash != config_hash(cfg) {
            return Err(Error::Integrity(
                "checkpoint was written under a different run config".into(),
            ));
        }
        serde_json::from_value(self.payload.clone()).map_err(|e| Error::Integrity(e.to_string()))
    }
}
