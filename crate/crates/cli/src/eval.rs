//! `eval`: a frozen checkpoint over a split, with success and quality tables.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use compose_core::env::{Environment, Example, Instance};
use compose_core::metrics::{
    frechet_distance, precision_recall, quality_table, rasters_hash, success_table, write_report, FeatureCache,
    QualityRow, RasterPca, SuccessRow, PCA_DIM, RASTER_PCA,
};
use compose_core::raster::Raster;
use compose_core::rect::{generate_eval_set, Difficulty, RectConfig, RectEnv};
use compose_core::search::{derive_seed, PlanTrajectory, Sampling};
use compose_core::tangram::{render_silhouette, GOAL_RES};
use compose_core::train::{
    latest_checkpoint, load_checkpoint, rollout_all, summarize, EvalSummary, Planner, RewardSource, Terminal,
    TrainState, TrainingConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{load, resolve_seed, write_resolved, EnvKind};
use crate::error::{CliError, CliResult};
use crate::train::{load_rect, load_tangram, tangram_data, TrainConfig, RUN_CONFIG};

const K_NEIGHBOURS: usize = 3;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Policy argmax (temperature 0).
    Greedy,
    /// Policy sampling at `temperature`.
    Sample,
    /// Gumbel search with noise scale `gumbel_scale`.
    #[default]
    Search,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Val,
    #[default]
    Test,
    /// Fresh problems with the evaluation inventory, disjoint from the dataset.
    Eval,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory written by `train`.
    #[arg(long)]
    run: Option<PathBuf>,
    /// Specific checkpoint; defaults to the run's latest.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    split: Option<SplitKind>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    gumbel_scale: Option<f64>,
    /// Easy and Hard problem counts for `--split eval`.
    #[arg(long)]
    n_easy: Option<usize>,
    #[arg(long)]
    n_hard: Option<usize>,
    /// Method name in the report tables.
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report directory; defaults to `<run>/eval`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub run: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub split: SplitKind,
    pub mode: Mode,
    pub temperature: f64,
    pub gumbel_scale: f64,
    pub n_easy: usize,
    pub n_hard: usize,
    pub label: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            run: PathBuf::from("runs/default"),
            checkpoint: None,
            split: SplitKind::Test,
            mode: Mode::Search,
            temperature: 1.0,
            gumbel_scale: 0.0,
            n_easy: 200,
            n_hard: 200,
            label: None,
            seed: None,
            out: None,
        }
    }
}

impl EvalConfig {
    fn apply(&mut self, a: EvalArgs) -> CliResult<()> {
        self.run = a.run.unwrap_or(std::mem::take(&mut self.run));
        self.checkpoint = a.checkpoint.or(self.checkpoint.take());
        self.split = a.split.unwrap_or(self.split);
        self.mode = a.mode.unwrap_or(self.mode);
        self.temperature = a.temperature.unwrap_or(self.temperature);
        self.gumbel_scale = a.gumbel_scale.unwrap_or(self.gumbel_scale);
        self.n_easy = a.n_easy.unwrap_or(self.n_easy);
        self.n_hard = a.n_hard.unwrap_or(self.n_hard);
        self.label = a.label.or(self.label.take());
        self.out = a.out.or(self.out.take());
        self.seed = Some(resolve_seed(a.seed, self.seed)?);
        if self.mode == Mode::Sample && self.temperature <= 0.0 {
            return Err(CliError::Usage("sampling temperature must be positive; use --mode greedy for 0".into()));
        }
        if self.gumbel_scale < 0.0 {
            return Err(CliError::Usage("gumbel scale must be non-negative".into()));
        }
        Ok(())
    }

    fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| match self.mode {
            Mode::Greedy => "policy-greedy".into(),
            Mode::Sample => format!("policy-t{}", self.temperature),
            Mode::Search => format!("search-g{}", self.gumbel_scale),
        })
    }

    fn planner(&self, train: &TrainingConfig) -> Planner {
        match self.mode {
            Mode::Greedy => Planner::Policy(Sampling::Greedy),
            Mode::Sample => Planner::Policy(Sampling::Temperature(self.temperature)),
            Mode::Search => Planner::Search(compose_core::search::SearchParams { g_scale: self.gumbel_scale, ..train.search }),
        }
    }
}

fn load_state<S, G>(cfg: &EvalConfig) -> CliResult<(TrainingConfig, TrainState<S, G>)>
where
    S: serde::de::DeserializeOwned,
    G: serde::de::DeserializeOwned,
{
    let path = match &cfg.checkpoint {
        Some(p) => p.clone(),
        None => latest_checkpoint(&cfg.run)?
            .ok_or_else(|| CliError::Data(format!("no checkpoint under {}", cfg.run.display())))?,
    };
    if !path.is_file() {
        return Err(CliError::Data(format!("checkpoint {} not found", path.display())));
    }
    load_checkpoint(&path).map_err(|e| match e {
        compose_core::Error::Json(e) => CliError::Data(format!("checkpoint mismatch: {}: {e}", path.display())),
        e => e.into(),
    })
}

fn check_dims<E: Environment, S, G>(env: &E, state: &TrainState<S, G>) -> CliResult<()> {
    let p = &state.policy;
    if p.input_dim != env.policy_dim() || p.num_actions != env.num_actions() {
        return Err(CliError::Data(format!(
            "checkpoint mismatch: policy is {}→{} but the {} environment needs {}→{}",
            p.input_dim,
            p.num_actions,
            env.name(),
            env.policy_dim(),
            env.num_actions()
        )));
    }
    Ok(())
}

/// Rolls out every instance and returns trajectories in instance order.
fn rollouts<E: Environment>(
    env: &E,
    train: &TrainingConfig,
    state: &TrainState<E::State, E::Goal>,
    cfg: &EvalConfig,
    instances: &[Instance<E::State, E::Goal>],
) -> CliResult<Vec<PlanTrajectory<E::State, E::Goal>>> {
    let terminal = match train.reward_source {
        RewardSource::Oracle => Terminal::Oracle,
        RewardSource::Learned => Terminal::Learned(&state.reward),
    };
    let seed = derive_seed(&[cfg.seed.unwrap_or(0), 0xe7a1]);
    Ok(rollout_all(env, &state.policy, &terminal, cfg.planner(train), instances, seed)?)
}

fn quality(label: &str, reference: &[Raster], generated: &[Raster], valid: f64, cache_dir: &Path) -> CliResult<QualityRow> {
    let pca = RasterPca::fit(reference, PCA_DIM)?;
    let cache = FeatureCache::new(cache_dir)?;
    let real = cache.get_or_compute(RASTER_PCA, &rasters_hash(reference), || pca.features(reference))?;
    let gen = pca.features(generated)?;
    let fid = frechet_distance(&real, &gen)?;
    let (precision, recall) = precision_recall(&real, &gen, K_NEIGHBOURS)?;
    Ok(QualityRow { method: label.into(), fid, precision: 100.0 * precision, recall: 100.0 * recall, valid: 100.0 * valid })
}

#[derive(Serialize)]
struct Summary {
    label: String,
    env: EnvKind,
    split: SplitKind,
    overall: EvalSummary,
    easy: Option<EvalSummary>,
    hard: Option<EvalSummary>,
}

fn finish<S: Serialize, G: Serialize>(
    out: &Path,
    summary: &Summary,
    finals: &[Example<S, G>],
    success: Option<SuccessRow>,
    quality_row: QualityRow,
) -> CliResult<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(summary)?)?;
    std::fs::write(out.join("final_states.json"), serde_json::to_string(finals)?)?;
    if let Some(row) = &success {
        write_report(out, "success", success_table(std::slice::from_ref(row)))?;
        println!("{}", success_table(std::slice::from_ref(row)).1);
    }
    write_report(out, "quality", quality_table(std::slice::from_ref(&quality_row)))?;
    println!("{}", quality_table(std::slice::from_ref(&quality_row)).1);
    println!("report written to {}", out.display());
    Ok(())
}

fn finals<S: Clone, G: Clone>(trajs: &[PlanTrajectory<S, G>]) -> Vec<Example<S, G>> {
    trajs.iter().map(|t| Example { goal: t.goal.clone(), state: t.final_state.clone() }).collect()
}

fn eval_rect(run: &TrainConfig, cfg: &EvalConfig, out: &Path) -> CliResult<()> {
    let ds = load_rect(run.data.as_deref())?;
    let configs: Vec<RectConfig> = match cfg.split {
        SplitKind::Val => ds.val.clone(),
        SplitKind::Test => ds.test.clone(),
        SplitKind::Eval => {
            let (easy, hard) = generate_eval_set(cfg.n_easy, cfg.n_hard, cfg.seed.unwrap_or(0), &ds.signatures())?;
            easy.into_iter().chain(hard).collect()
        }
    };
    if configs.is_empty() {
        return Err(CliError::Data("evaluation split is empty".into()));
    }
    let (train, state) = load_state(cfg)?;
    check_dims(&RectEnv, &state)?;
    let instances: Vec<_> = configs.iter().map(RectConfig::instance).collect();
    let trajs = rollouts(&RectEnv, &train, &state, cfg, &instances)?;
    let bucket = |d: Difficulty| -> CliResult<Option<EvalSummary>> {
        let t: Vec<_> = trajs.iter().zip(&configs).filter(|(_, c)| c.difficulty == d).map(|(t, _)| t.clone()).collect();
        Ok(if t.is_empty() { None } else { Some(summarize(&RectEnv, &t)?) })
    };
    let label = cfg.label();
    let summary = Summary {
        label: label.clone(),
        env: EnvKind::Rect,
        split: cfg.split,
        overall: summarize(&RectEnv, &trajs)?,
        easy: bucket(Difficulty::Easy)?,
        hard: bucket(Difficulty::Hard)?,
    };
    let pct = |s: &Option<EvalSummary>| s.as_ref().map_or(f64::NAN, |s| 100.0 * s.success_rate);
    let success = SuccessRow {
        method: label.clone(),
        easy: pct(&summary.easy),
        hard: pct(&summary.hard),
        valid: 100.0 * summary.overall.validity_rate,
    };
    let reference: Vec<Raster> =
        configs.iter().map(|c| c.example().map(|e| e.state.raster())).collect::<Result<_, _>>()?;
    let generated: Vec<Raster> = trajs.iter().map(|t| t.final_state.raster()).collect();
    let q = quality(&label, &reference, &generated, summary.overall.validity_rate, &out.join("feature_cache"))?;
    finish(out, &summary, &finals(&trajs), Some(success), q)
}

fn eval_tangram(run: &TrainConfig, cfg: &EvalConfig, out: &Path) -> CliResult<()> {
    let env = load_tangram(run)?;
    let data = tangram_data(&env, run)?;
    if data.heldout.is_empty() {
        return Err(CliError::Data("no held-out tangram goals (tangram_val = 0)".into()));
    }
    let (train, state) = load_state(cfg)?;
    check_dims(&env, &state)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed.unwrap_or(0), 0x7a]));
    let instances: Vec<_> = data.heldout.iter().map(|e| env.initial_instance(e, true, &mut rng)).collect();
    let trajs = rollouts(&env, &train, &state, cfg, &instances)?;
    let label = cfg.label();
    let summary = Summary {
        label: label.clone(),
        env: EnvKind::Tangram,
        split: cfg.split,
        overall: summarize(&env, &trajs)?,
        easy: None,
        hard: None,
    };
    let reference: Vec<Raster> =
        data.heldout.iter().map(|e| render_silhouette(&e.state, GOAL_RES)).collect::<Result<_, _>>()?;
    let generated: Vec<Raster> =
        trajs.iter().map(|t| render_silhouette(&t.final_state, GOAL_RES)).collect::<Result<_, _>>()?;
    let q = quality(&label, &reference, &generated, summary.overall.validity_rate, &out.join("feature_cache"))?;
    finish(out, &summary, &finals(&trajs), None, q)
}

pub fn eval(args: EvalArgs) -> CliResult<()> {
    let mut cfg: EvalConfig = load(args.config.as_deref())?;
    cfg.apply(args)?;
    let run_path = cfg.run.join(RUN_CONFIG);
    if !run_path.is_file() {
        return Err(CliError::Data(format!("{} is not a run directory (no {RUN_CONFIG})", cfg.run.display())));
    }
    let run: TrainConfig = load(Some(&run_path))?;
    let out = cfg.out.clone().unwrap_or_else(|| cfg.run.join("eval"));
    write_resolved(&out, "eval_config.json", &cfg)?;
    match run.env {
        EnvKind::Rect => eval_rect(&run, &cfg, &out),
        EnvKind::Tangram => eval_tangram(&run, &cfg, &out),
    }
}
