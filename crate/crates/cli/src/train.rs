//! `train`: the generate / improve / refine loop on either environment.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, ValueEnum};
use compose_core::env::Environment;
use compose_core::rect::{RectDataset, RectEnv};
use compose_core::tangram::{ActionTable, TangramEnv};
use compose_core::train::{rect_train_data, tangram_train_data, Operator, TrainData, Trainer, TrainingConfig};
use serde::{Deserialize, Serialize};

use crate::config::{load, non_empty_dir, resolve_seed, write_resolved, EnvKind, MaskKind};
use crate::error::{CliError, CliResult};

pub const RUN_CONFIG: &str = "run_config.json";

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OperatorArg {
    Muzero,
    Ppo,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    env: Option<EnvKind>,
    /// Rect dataset directory (from gen-rect).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Tangram action table file (from precompute-tangram).
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, value_enum)]
    operator: Option<OperatorArg>,
    /// Skip adversarial reward refinement.
    #[arg(long)]
    no_ga: bool,
    /// Skip contrastive reward pretraining.
    #[arg(long)]
    no_pretrain: bool,
    /// Tangram action mask.
    #[arg(long, value_enum)]
    mask: Option<MaskKind>,
    /// Multiplier on the root Gumbel noise during self-play search.
    #[arg(long)]
    gumbel_scale: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continue from the latest checkpoint in the run directory.
    #[arg(long)]
    resume: bool,
    /// Reuse a non-empty run directory from scratch.
    #[arg(long, conflicts_with = "resume")]
    force: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub env: EnvKind,
    pub data: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub mask: MaskKind,
    /// Generated tangram positives for training and validation.
    pub tangram_train: usize,
    pub tangram_val: usize,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub training: TrainingConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            env: EnvKind::Rect,
            data: None,
            table: None,
            mask: MaskKind::Full,
            tangram_train: 200,
            tangram_val: 50,
            seed: None,
            out: PathBuf::from("runs/default"),
            training: TrainingConfig::default(),
        }
    }
}

impl TrainConfig {
    fn apply(&mut self, a: &TrainArgs) -> CliResult<()> {
        if let Some(e) = a.env {
            self.env = e;
        }
        if let Some(d) = &a.data {
            self.data = Some(d.clone());
        }
        if let Some(t) = &a.table {
            self.table = Some(t.clone());
        }
        if let Some(m) = a.mask {
            self.mask = m;
        }
        if let Some(o) = &a.out {
            self.out = o.clone();
        }
        let t = &mut self.training;
        if let Some(op) = a.operator {
            t.operator = match op {
                OperatorArg::Muzero => Operator::Muzero,
                OperatorArg::Ppo => Operator::Ppo,
            };
        }
        t.adversarial &= !a.no_ga;
        t.pretrain_reward &= !a.no_pretrain;
        if let Some(g) = a.gumbel_scale {
            t.search.g_scale = g;
        }
        if let Some(n) = a.iterations {
            t.iterations = n;
        }
        if let Some(n) = a.episodes {
            t.episodes_per_iteration = n;
        }
        let seed = resolve_seed(a.seed, self.seed)?;
        self.seed = Some(seed);
        t.seed = seed;
        if self.env == EnvKind::Rect && self.mask == MaskKind::Partial {
            return Err(CliError::Usage("--mask partial applies to the tangram environment only".into()));
        }
        t.validate().map_err(|e| CliError::Usage(e.to_string()))
    }
}

pub fn load_rect(data: Option<&Path>) -> CliResult<RectDataset> {
    let dir = data.ok_or_else(|| CliError::Data("missing rect dataset: pass --data DIR (see gen-rect)".into()))?;
    if !dir.is_dir() {
        return Err(CliError::Data(format!("dataset directory {} not found", dir.display())));
    }
    Ok(RectDataset::load(dir)?)
}

pub fn load_tangram(cfg: &TrainConfig) -> CliResult<TangramEnv> {
    let path = cfg
        .table
        .as_deref()
        .ok_or_else(|| CliError::Data("missing action table: pass --table FILE (see precompute-tangram)".into()))?;
    let table = ActionTable::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(TangramEnv::new(Arc::new(table), cfg.mask.into()))
}

pub fn tangram_data(env: &TangramEnv, cfg: &TrainConfig) -> CliResult<TrainData<compose_core::tangram::TangramState, compose_core::tangram::TangramGoal>> {
    Ok(tangram_train_data(env, cfg.tangram_train, cfg.tangram_val, cfg.training.seed)?)
}

fn run<E: Environment>(env: &E, data: &TrainData<E::State, E::Goal>, cfg: &TrainConfig, resume: bool) -> CliResult<()> {
    let mut trainer = if resume {
        Trainer::resume(env, data, &cfg.out)?
    } else {
        let mut t = Trainer::new(env, cfg.training.clone(), data)?.with_run_dir(&cfg.out)?;
        if let Some(r) = t.prepare()? {
            println!("reward pretraining: {} steps, retrieval accuracy {:.3} over {} candidates", r.steps, r.best_accuracy, r.candidates);
        }
        t
    };
    for r in trainer.train()? {
        println!(
            "iteration {:>3}: terminal reward {:.3}, success {:.3}, valid {:.3}, auc {}",
            r.iteration,
            r.mean_terminal_reward,
            r.success_rate,
            r.validity_rate,
            r.auc.map_or("-".into(), |a| format!("{a:.3}"))
        );
    }
    println!("run directory {}", cfg.out.display());
    Ok(())
}

/// Removes a previous run's artifacts, leaving anything else in place.
fn clear_run(dir: &Path) -> CliResult<()> {
    for sub in ["checkpoints", "trajectories"] {
        let p = dir.join(sub);
        if p.is_dir() {
            std::fs::remove_dir_all(p)?;
        }
    }
    for f in ["config.json", RUN_CONFIG, "reports.jsonl"] {
        let p = dir.join(f);
        if p.is_file() {
            std::fs::remove_file(p)?;
        }
    }
    Ok(())
}

pub fn train(args: TrainArgs) -> CliResult<()> {
    let mut cfg: TrainConfig = load(args.config.as_deref())?;
    cfg.apply(&args)?;
    if args.resume {
        // The run's own resolved config is authoritative on resume.
        let saved: TrainConfig = load(Some(&cfg.out.join(RUN_CONFIG)))?;
        cfg = saved;
    } else if non_empty_dir(&cfg.out) && !args.force {
        return Err(CliError::Data(format!("{} is not empty; pass --resume or --force", cfg.out.display())));
    } else if args.force {
        clear_run(&cfg.out)?;
    }
    match cfg.env {
        EnvKind::Rect => {
            let ds = load_rect(cfg.data.as_deref())?;
            let data = rect_train_data(&RectEnv, &ds)?;
            write_resolved(&cfg.out, RUN_CONFIG, &cfg)?;
            run(&RectEnv, &data, &cfg, args.resume)
        }
        EnvKind::Tangram => {
            let env = load_tangram(&cfg)?;
            let data = tangram_data(&env, &cfg)?;
            write_resolved(&cfg.out, RUN_CONFIG, &cfg)?;
            run(&env, &data, &cfg, args.resume)
        }
    }
}
