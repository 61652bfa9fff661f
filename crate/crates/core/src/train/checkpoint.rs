use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{TrainState, TrainingConfig};
use crate::error::{Error, Result};

#[derive(Serialize)]
#[serde(bound(serialize = "S: Serialize, G: Serialize"))]
struct PayloadRef<'a, S, G> {
    version: u32,
    config: &'a TrainingConfig,
    state: &'a TrainState<S, G>,
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "S: DeserializeOwned, G: DeserializeOwned"))]
struct Payload<S, G> {
    version: u32,
    config: TrainingConfig,
    state: TrainState<S, G>,
}

const VERSION: u32 = 1;

/// Writes the hex SHA-256 of the JSON payload on the first line, then the
/// payload itself.
pub fn save_checkpoint<S: Serialize, G: Serialize>(path: &Path, cfg: &TrainingConfig, state: &TrainState<S, G>) -> Result<()> {
    let body = serde_json::to_string(&PayloadRef { version: VERSION, config: cfg, state })?;
    let sum = hex::encode(Sha256::digest(body.as_bytes()));
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, format!("{sum}\n{body}"))?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

pub fn load_checkpoint<S: DeserializeOwned, G: DeserializeOwned>(path: &Path) -> Result<(TrainingConfig, TrainState<S, G>)> {
    let text = std::fs::read_to_string(path)?;
    let (sum, body) = text.split_once('\n').ok_or_else(|| Error::Checksum(format!("{}: missing header", path.display())))?;
    if hex::encode(Sha256::digest(body.as_bytes())) != sum.trim() {
        return Err(Error::Checksum(path.display().to_string()));
    }
    let p: Payload<S, G> = serde_json::from_str(body)?;
    if p.version != VERSION {
        return Err(Error::Data(format!("checkpoint version {}", p.version)));
    }
    Ok((p.config, p.state))
}

/// Highest-numbered checkpoint in a run directory.
pub fn latest_checkpoint(run_dir: &Path) -> Result<Option<PathBuf>> {
    let dir = run_dir.join("checkpoints");
    if !dir.exists() {
        return Ok(None);
    }
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let n = path
            .extension()
            .filter(|e| *e == "json")
            .and_then(|_| path.file_stem()?.to_str()?.parse::<u64>().ok());
        if let Some(n) = n {
            if best.as_ref().is_none_or(|(b, _)| n > *b) {
                best = Some((n, path));
            }
        }
    }
    Ok(best.map(|(_, p)| p))
}
