//! Flag/config-file merging and the provenance header.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Environment variable consulted when neither a flag nor the config file
/// gives a seed.
pub const SEED_ENV: &str = "MBTREE_SEED";

/// Parameters of one run after merging, with their digest.
#[derive(Debug, Clone)]
pub struct Resolved<T> {
    pub params: T,
    pub seed: u64,
    pub digest: String,
}

impl<T> Resolved<T> {
    /// `# config_digest=<sha256> seed=<seed>`.
    pub fn header(&self) -> String {
        format!("# config_digest={} seed={}\n", self.digest, self.seed)
    }

    /// Provenance fields for JSON artifacts.
    pub fn stamp(&self, obj: &mut Map<String, Value>) {
        obj.insert("config_digest".into(), Value::from(self.digest.clone()));
        obj.insert("seed".into(), Value::from(self.seed));
    }
}

pub fn load_file(path: &Path) -> CliResult<Map<String, Value>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::new(crate::error::Kind::Io, format!("{}: {e}", path.display())))?;
    match serde_json::from_str(&text)? {
        Value::Object(m) => Ok(m),
        _ => Err(CliError::general(format!("{}: config must be a JSON object", path.display()))),
    }
}

/// Overlays `flags` on `file`, pulls out the seed, and digests the result.
pub fn resolve<T: Serialize + DeserializeOwned>(
    command: &str,
    flags: &T,
    seed_flag: Option<u64>,
    file: Option<Map<String, Value>>,
) -> CliResult<Resolved<T>> {
    let mut merged = file.unwrap_or_default();
    let file_seed = match merged.remove("seed") {
        None => None,
        Some(v) => Some(
            v.as_u64()
                .ok_or_else(|| CliError::general(format!("config seed must be an unsigned integer, got {v}")))?,
        ),
    };
    // Settings that cannot change the output stay out of the digest.
    for key in ["threads", "out", "summary"] {
        merged.remove(key);
    }
    if let Value::Object(f) = serde_json::to_value(flags)? {
        for (k, v) in f {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    let params: T = serde_json::from_value(Value::Object(merged.clone()))
        .map_err(|e| CliError::general(format!("{command}: {e}")))?;
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(s) => Some(
            s.parse()
                .map_err(|_| CliError::general(format!("{SEED_ENV}={s:?} is not an unsigned integer")))?,
        ),
        Err(_) => None,
    };
    let seed = seed_flag.or(file_seed).or(env_seed).unwrap_or(0);
    let canonical = serde_json::to_string(&serde_json::json!({
        "command": command,
        "params": Value::Object(merged),
    }))?;
    let digest = hex::encode(Sha256::digest(canonical.as_bytes()));
    Ok(Resolved { params, seed, digest })
}

/// Fetches a required merged parameter.
pub fn need<V: Clone>(value: &Option<V>, name: &str) -> CliResult<V> {
    value
        .clone()
        .ok_or_else(|| CliError::general(format!("missing --{name} (flag or config key {name:?})")))
}
