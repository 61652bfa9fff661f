//! Command configs: an optional JSON file, then flag overrides. The resolved
//! config is written next to each command's output so the run can be
//! repeated from that file alone.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Global seed fallback when neither a flag nor the config file sets one.
pub const SEED_ENV: &str = "COMPOSE_MCTS_SEED";

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

/// Flag, then config file, then the environment, then 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

pub fn write_resolved<T: Serialize>(dir: &Path, name: &str, cfg: &T) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(cfg)?)?;
    Ok(path)
}

/// True when `dir` exists and holds at least one entry.
pub fn non_empty_dir(dir: &Path) -> bool {
    std::fs::read_dir(dir).map(|mut d| d.next().is_some()).unwrap_or(false)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    #[default]
    Rect,
    Tangram,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    Partial,
    #[default]
    Full,
}

impl From<MaskKind> for compose_core::tangram::MaskMode {
    fn from(m: MaskKind) -> Self {
        match m {
            MaskKind::Partial => compose_core::tangram::MaskMode::Partial,
            MaskKind::Full => compose_core::tangram::MaskMode::Full,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields, default)]
    struct Probe {
        n: usize,
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"n": 3, "bogus": 1}"#).unwrap();
        let err = load::<Probe>(Some(&p)).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        std::fs::write(&p, r#"{"n": 3}"#).unwrap();
        assert_eq!(load::<Probe>(Some(&p)).unwrap(), Probe { n: 3 });
        assert_eq!(load::<Probe>(None).unwrap(), Probe::default());
    }

    #[test]
    fn flag_beats_file() {
        assert_eq!(resolve_seed(Some(4), Some(9)).unwrap(), 4);
        assert_eq!(resolve_seed(None, Some(9)).unwrap(), 9);
    }
}
