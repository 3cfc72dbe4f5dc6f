use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EmbedderParams, ProxyBank};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "proxylab-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Trained head and proxies, with the seed and resolved run configuration.
///
/// Every float is stored as its hex bit pattern, so save/load is bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub config: serde_json::Value,
    pub embedder: EmbedderParams,
    pub proxies: ProxyBank,
}

impl Checkpoint {
    pub fn new(seed: u64, config: serde_json::Value, embedder: EmbedderParams, proxies: ProxyBank) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            seed,
            config,
            embedder,
            proxies,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::parse(
                1,
                format!("unsupported checkpoint {} v{}", ckpt.format, ckpt.version),
            ));
        }
        if ckpt.embedder.embed_bias.shape() != (1, ckpt.embedder.emb_dim())
            || ckpt.proxies.proxies.cols() != ckpt.embedder.emb_dim()
            || ckpt.proxies.proxies.rows() != ckpt.proxies.class_ids.len()
        {
            return Err(Error::parse(1, "checkpoint blocks have inconsistent shapes"));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
