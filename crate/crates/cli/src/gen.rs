//! `gen-rect` and `precompute-tangram`.

use std::path::PathBuf;

use clap::Args;
use compose_core::rect::{DatasetSizes, Difficulty, RectDataset};
use compose_core::tangram::{precompute_action_table, ActionTable};
use serde::{Deserialize, Serialize};

use crate::config::{load, non_empty_dir, resolve_seed, write_resolved};
use crate::error::{CliError, CliResult};

pub const TABLE_FILE: &str = "action_table.json";

#[derive(Args, Debug)]
pub struct GenRectArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: Option<usize>,
    #[arg(long)]
    val: Option<usize>,
    #[arg(long)]
    test: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write into a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenRectConfig {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl Default for GenRectConfig {
    fn default() -> Self {
        GenRectConfig { train: 200, val: 20, test: 50, seed: None, out: PathBuf::from("data/rect") }
    }
}

pub fn gen_rect(args: GenRectArgs) -> CliResult<()> {
    let mut cfg: GenRectConfig = load(args.config.as_deref())?;
    cfg.train = args.train.unwrap_or(cfg.train);
    cfg.val = args.val.unwrap_or(cfg.val);
    cfg.test = args.test.unwrap_or(cfg.test);
    cfg.out = args.out.unwrap_or(cfg.out);
    let seed = resolve_seed(args.seed, cfg.seed)?;
    cfg.seed = Some(seed);
    if non_empty_dir(&cfg.out) && !args.force {
        return Err(CliError::Data(format!("{} is not empty; pass --force to overwrite", cfg.out.display())));
    }
    let ds = RectDataset::generate(DatasetSizes { train: cfg.train, val: cfg.val, test: cfg.test }, seed)?;
    ds.save(&cfg.out)?;
    write_resolved(&cfg.out, "gen_rect_config.json", &cfg)?;
    for (name, split) in [("train", &ds.train), ("val", &ds.val), ("test", &ds.test)] {
        let hard = split.iter().filter(|c| c.difficulty == Difficulty::Hard).count();
        let easy = split.iter().filter(|c| c.difficulty == Difficulty::Easy).count();
        println!("{name}: {} configs ({easy} easy, {hard} hard)", split.len());
    }
    println!("wrote {}", cfg.out.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct PrecomputeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the table and its resolved config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrecomputeConfig {
    pub out: PathBuf,
}

impl Default for PrecomputeConfig {
    fn default() -> Self {
        PrecomputeConfig { out: PathBuf::from("data/tangram") }
    }
}

pub fn precompute_tangram(args: PrecomputeArgs) -> CliResult<()> {
    let mut cfg: PrecomputeConfig = load(args.config.as_deref())?;
    cfg.out = args.out.unwrap_or(cfg.out);
    let table = precompute_action_table()?;
    let path = cfg.out.join(TABLE_FILE);
    let up_to_date = path.exists()
        && match ActionTable::load(&path) {
            Ok(old) => old.to_json()? == table.to_json()?,
            Err(e) => {
                log::warn!("existing table {} is unreadable ({e}); rewriting", path.display());
                false
            }
        };
    if !up_to_date {
        std::fs::create_dir_all(&cfg.out)?;
        table.save(&path)?;
    }
    write_resolved(&cfg.out, "precompute_config.json", &cfg)?;
    println!(
        "{} actions, checksum {} -> {}{}",
        table.len(),
        table.metadata().checksum,
        path.display(),
        if up_to_date { " (unchanged)" } else { "" }
    );
    Ok(())
}
