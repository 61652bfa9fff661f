//! Generative adversarial training: self-play search, policy improvement
//! from the planned trajectories and adversarial reward refinement.

mod checkpoint;
mod data;
mod eval;

pub use checkpoint::*;
pub use data::*;
pub use eval::*;

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, Example};
use crate::error::{Error, Result};
use crate::metrics::auc;
use crate::models::{
    ppo_update, sigmoid, Adam, PolicyLosses, PolicySample, PolicyValueNet, PpoConfig, PpoLosses, PpoSample,
    RewardLosses, RewardModel, RewardPair,
};
use crate::search::{derive_seed, OracleScore, PlanTrajectory, Sampling, SearchParams, TerminalScore};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    /// Imitate the search's improved policy.
    Muzero,
    /// Clipped policy gradient on sampled rollouts.
    Ppo,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardSource {
    Oracle,
    Learned,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub iterations: usize,
    pub episodes_per_iteration: usize,
    pub operator: Operator,
    /// Refine the reward model against generated negatives.
    pub adversarial: bool,
    /// Contrastive reward pretraining on the positives before the loop.
    pub pretrain_reward: bool,
    pub reward_source: RewardSource,
    pub lambda: f64,
    pub temperature: f64,
    pub policy_lr: f64,
    pub reward_lr: f64,
    pub pretrain_lr: f64,
    pub pretrain_batch: usize,
    pub pretrain_max_steps: usize,
    pub pretrain_eval_every: usize,
    pub pretrain_patience: usize,
    pub policy_hidden: usize,
    pub policy_epochs: usize,
    pub batch_size: usize,
    /// Adam steps on the reward model per iteration.
    pub reward_steps: usize,
    pub reward_batch: usize,
    /// Behaviour-cloning steps on dataset demonstrations before the loop.
    pub bc_steps: usize,
    pub bc_lr: f64,
    pub negative_capacity: usize,
    /// Stop when the mean terminal reward gains less than `plateau_tol`
    /// over this many iterations; 0 disables the check.
    pub plateau_window: usize,
    pub plateau_tol: f64,
    pub search: SearchParams,
    pub ppo: PpoConfig,
    pub ppo_epochs: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            iterations: 6,
            episodes_per_iteration: 64,
            operator: Operator::Muzero,
            adversarial: true,
            pretrain_reward: true,
            reward_source: RewardSource::Learned,
            lambda: 1.0,
            temperature: 0.07,
            policy_lr: 5e-5,
            reward_lr: 1e-3,
            pretrain_lr: 1e-3,
            pretrain_batch: 64,
            pretrain_max_steps: 2000,
            pretrain_eval_every: 50,
            pretrain_patience: 10,
            policy_hidden: PolicyValueNet::DEFAULT_HIDDEN,
            policy_epochs: 4,
            batch_size: 64,
            reward_steps: 50,
            reward_batch: 64,
            bc_steps: 1000,
            bc_lr: 1e-3,
            negative_capacity: 10_000,
            plateau_window: 5,
            plateau_tol: 0.005,
            search: SearchParams::default(),
            ppo: PpoConfig::default(),
            ppo_epochs: 4,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        let positive = [
            self.iterations,
            self.episodes_per_iteration,
            self.batch_size,
            self.reward_batch,
            self.pretrain_batch,
            self.pretrain_eval_every,
            self.policy_hidden,
            self.negative_capacity,
        ];
        if positive.contains(&0) {
            return Err(Error::InvalidArgument("training counts must be positive".into()));
        }
        if !(self.temperature > 0.0) || self.lambda < 0.0 {
            return Err(Error::InvalidArgument("temperature must be positive and lambda non-negative".into()));
        }
        Ok(())
    }
}

/// Terminal score chosen at run time.
pub enum Terminal<'a> {
    Oracle,
    Learned(&'a RewardModel),
}

impl<E: Environment> TerminalScore<E> for Terminal<'_> {
    fn score(&self, env: &E, s: &E::State, g: &E::Goal) -> Result<f64> {
        match self {
            Terminal::Oracle => OracleScore.score(env, s, g),
            Terminal::Learned(m) => Ok(sigmoid(m.score(&RewardModel::pair(env, s, g))?)),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    /// Cumulative episodes generated; strictly increasing.
    pub episodes_total: usize,
    pub mean_terminal_reward: f64,
    pub success_rate: f64,
    pub validity_rate: f64,
    pub dead_end_rate: f64,
    /// Held-out positives against this iteration's fresh failed outputs,
    /// scored before the reward update.
    pub auc: Option<f64>,
    pub policy: Option<PolicyLosses>,
    pub ppo: Option<PpoLosses>,
    pub reward: Option<RewardLosses>,
    pub negatives: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize, G: Serialize", deserialize = "S: DeserializeOwned, G: DeserializeOwned"))]
pub struct TrainState<S, G> {
    pub iteration: usize,
    pub episodes_total: usize,
    pub policy: PolicyValueNet,
    pub policy_opt: Adam,
    pub reward: RewardModel,
    pub reward_opt: Adam,
    pub negatives: VecDeque<Example<S, G>>,
    pub reports: Vec<IterationReport>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub steps: usize,
    pub best_accuracy: f64,
    pub candidates: usize,
    pub history: Vec<(usize, f64)>,
}

const TAG_INIT: u64 = 1;
const TAG_EPISODE: u64 = 2;
const TAG_POLICY: u64 = 3;
const TAG_REWARD: u64 = 4;
const TAG_PRETRAIN: u64 = 5;
const TAG_BC: u64 = 6;

fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}

/// Rescales advantages to zero mean and unit variance over the batch.
fn normalize_advantages(samples: &mut [PpoSample]) {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt().max(1e-8);
    for s in samples {
        s.advantage = (s.advantage - mean) / sd;
    }
}

/// AUC of the reward model separating `positives` from `negatives`; `None`
/// when either side is empty.
pub fn reward_auc<E: Environment>(
    env: &E,
    model: &RewardModel,
    positives: &[Example<E::State, E::Goal>],
    negatives: &[Example<E::State, E::Goal>],
) -> Result<Option<f64>> {
    if positives.is_empty() || negatives.is_empty() {
        return Ok(None);
    }
    let score = |e: &Example<E::State, E::Goal>| model.score(&RewardModel::pair(env, &e.state, &e.goal));
    let pos: Vec<f64> = positives.par_iter().map(score).collect::<Result<_>>()?;
    let neg: Vec<f64> = negatives.par_iter().map(score).collect::<Result<_>>()?;
    Ok(Some(auc(&pos, &neg)?))
}

/// Contrastive pretraining on the positives, stopping once validation
/// retrieval accuracy has not improved for `patience` evaluations.
pub fn pretrain_reward<E: Environment>(
    env: &E,
    model: &mut RewardModel,
    positives: &[Example<E::State, E::Goal>],
    validation: &[Example<E::State, E::Goal>],
    cfg: &TrainingConfig,
) -> Result<PretrainReport> {
    if positives.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let pairs: Vec<RewardPair> = positives.iter().map(|e| RewardModel::pair(env, &e.state, &e.goal)).collect();
    let val: Vec<RewardPair> = validation.iter().map(|e| RewardModel::pair(env, &e.state, &e.goal)).collect();
    let mut opt = Adam::new(&model.params, cfg.pretrain_lr);
    let mut rng = rng_for(&[cfg.seed, TAG_PRETRAIN]);
    let mut report = PretrainReport::default();
    // Retrieval among up to 20 candidates, fewer if validation has fewer
    // distinct goals.
    let mut distinct: Vec<&Vec<f64>> = Vec::new();
    for p in &val {
        if !distinct.contains(&&p.goal) {
            distinct.push(&p.goal);
        }
    }
    let candidates = distinct.len().min(20);
    report.candidates = candidates;
    let mut best = model.clone();
    let mut best_acc = f64::NEG_INFINITY;
    let mut since = 0;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut cursor = order.len();
    for step in 1..=cfg.pretrain_max_steps {
        let bs = cfg.pretrain_batch.min(pairs.len()).max(2);
        if cursor + bs > order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let batch: Vec<RewardPair> = order[cursor..(cursor + bs).min(order.len())].iter().map(|&i| pairs[i].clone()).collect();
        cursor += bs;
        if batch.len() >= 2 {
            model.cont_update(&mut opt, &batch, cfg.temperature)?;
        }
        report.steps = step;
        if step % cfg.pretrain_eval_every == 0 && candidates >= 2 {
            let acc =
                crate::models::retrieval_accuracy(model, &val, candidates, &mut rng_for(&[cfg.seed, TAG_PRETRAIN, 1]))?;
            report.history.push((step, acc));
            if acc > best_acc {
                best_acc = acc;
                best = model.clone();
                since = 0;
            } else {
                since += 1;
                if since >= cfg.pretrain_patience {
                    break;
                }
            }
        }
    }
    if best_acc.is_finite() {
        *model = best;
        report.best_accuracy = best_acc;
    }
    Ok(report)
}

/// Supervised warm start of the policy head on demonstration actions.
pub fn behaviour_clone<E: Environment>(
    env: &E,
    policy: &mut PolicyValueNet,
    demos: &[Demo<E::State, E::Goal>],
    steps: usize,
    lr: f64,
    batch_size: usize,
    seed: u64,
) -> Result<Option<PolicyLosses>> {
    let samples: Vec<PolicySample> = demos
        .iter()
        .flat_map(|d| {
            d.steps.iter().map(move |(s, a)| {
                let legal = env.legal_actions(s);
                let target = legal.iter().map(|&x| (x == *a) as u8 as f64).collect();
                PolicySample { features: env.policy_features(s, &d.goal), legal, target, ret: 0.0, value_weight: 0.0 }
            })
        })
        .collect();
    if samples.is_empty() || steps == 0 {
        return Ok(None);
    }
    let mut opt = Adam::new(&policy.params, lr);
    let mut rng = rng_for(&[seed, TAG_BC]);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut cursor = order.len();
    let mut last = None;
    for _ in 0..steps {
        if cursor >= order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let end = (cursor + batch_size).min(order.len());
        let batch: Vec<PolicySample> = order[cursor..end].iter().map(|&i| samples[i].clone()).collect();
        cursor = end;
        last = Some(policy.imitation_update(&mut opt, &batch)?);
    }
    Ok(last)
}

pub struct Trainer<'a, E: Environment> {
    pub env: &'a E,
    pub cfg: TrainingConfig,
    pub data: &'a TrainData<E::State, E::Goal>,
    pub state: TrainState<E::State, E::Goal>,
    pub run_dir: Option<PathBuf>,
}

impl<'a, E: Environment> Trainer<'a, E> {
    /// Fresh networks. The reward model is pretrained and the policy warm
    /// started by [`Trainer::prepare`].
    pub fn new(env: &'a E, cfg: TrainingConfig, data: &'a TrainData<E::State, E::Goal>) -> Result<Self> {
        cfg.validate()?;
        if data.instances.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut rng = rng_for(&[cfg.seed, TAG_INIT]);
        let mut policy = PolicyValueNet::for_env(env, cfg.policy_hidden, &mut rng);
        // Random initial values would bias every search backup.
        policy.zero_value_head();
        let reward = RewardModel::for_env(env, &mut rng);
        let state = TrainState {
            iteration: 0,
            episodes_total: 0,
            policy_opt: Adam::new(&policy.params, cfg.policy_lr),
            reward_opt: Adam::new(&reward.params, cfg.reward_lr),
            policy,
            reward,
            negatives: VecDeque::new(),
            reports: Vec::new(),
        };
        Ok(Trainer { env, cfg, data, state, run_dir: None })
    }

    /// Continues from the latest checkpoint in `run_dir`.
    pub fn resume(env: &'a E, data: &'a TrainData<E::State, E::Goal>, run_dir: &Path) -> Result<Self> {
        let path = latest_checkpoint(run_dir)?
            .ok_or_else(|| Error::Data(format!("no checkpoint under {}", run_dir.display())))?;
        let (cfg, state) = load_checkpoint(&path)?;
        Ok(Trainer { env, cfg, data, state, run_dir: Some(run_dir.to_path_buf()) })
    }

    /// Writes `config.json` and enables checkpoints, reports and
    /// trajectory logs under `dir`.
    pub fn with_run_dir(mut self, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir.join("checkpoints"))?;
        std::fs::create_dir_all(dir.join("trajectories"))?;
        std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&self.cfg)?)?;
        self.run_dir = Some(dir.to_path_buf());
        Ok(self)
    }

    /// Reward pretraining and policy warm start, as configured.
    pub fn prepare(&mut self) -> Result<Option<PretrainReport>> {
        let mut report = None;
        if self.cfg.pretrain_reward {
            report = Some(pretrain_reward(
                self.env,
                &mut self.state.reward,
                &self.data.positives,
                &self.data.heldout,
                &self.cfg,
            )?);
            log::info!("reward pretraining: {report:?}");
        }
        if self.cfg.bc_steps > 0 {
            let l = behaviour_clone(
                self.env,
                &mut self.state.policy,
                &self.data.demos,
                self.cfg.bc_steps,
                self.cfg.bc_lr,
                self.cfg.batch_size,
                self.cfg.seed,
            )?;
            log::info!("behaviour cloning: {l:?}");
        }
        self.state.policy_opt = Adam::new(&self.state.policy.params, self.cfg.policy_lr);
        self.state.reward_opt = Adam::new(&self.state.reward.params, self.cfg.reward_lr);
        Ok(report)
    }

    pub fn terminal(&self) -> Terminal<'_> {
        match self.cfg.reward_source {
            RewardSource::Oracle => Terminal::Oracle,
            RewardSource::Learned => Terminal::Learned(&self.state.reward),
        }
    }

    /// Self-play for one iteration: search episodes for the MuZero operator,
    /// policy samples for PPO.
    pub fn selfplay(&self, iteration: usize) -> Result<Vec<PlanTrajectory<E::State, E::Goal>>> {
        let terminal = self.terminal();
        let policy = &self.state.policy;
        (0..self.cfg.episodes_per_iteration)
            .into_par_iter()
            .map(|ep| {
                let mut rng = rng_for(&[self.cfg.seed, TAG_EPISODE, iteration as u64, ep as u64]);
                let inst = &self.data.instances[rng.random_range(0..self.data.instances.len())];
                match self.cfg.operator {
                    Operator::Muzero => {
                        crate::search::run_episode(self.env, policy, &terminal, self.cfg.search, inst, &mut rng)
                    }
                    Operator::Ppo => crate::search::policy_rollout(
                        self.env,
                        policy,
                        &terminal,
                        Sampling::Temperature(1.0),
                        self.cfg.search.gamma,
                        inst,
                        &mut rng,
                    ),
                }
            })
            .collect()
    }

    fn policy_phase(&mut self, iteration: usize, trajs: &[PlanTrajectory<E::State, E::Goal>]) -> Result<(Option<PolicyLosses>, Option<PpoLosses>)> {
        let env = self.env;
        let mut rng = rng_for(&[self.cfg.seed, TAG_POLICY, iteration as u64]);
        match self.cfg.operator {
            Operator::Muzero => {
                let samples: Vec<PolicySample> = trajs
                    .iter()
                    .flat_map(|t| {
                        t.steps.iter().map(move |s| PolicySample {
                            features: env.policy_features(&s.state, &t.goal),
                            legal: s.legal.clone(),
                            target: s.policy_target(),
                            ret: s.ret,
                            value_weight: 1.0,
                        })
                    })
                    .collect();
                if samples.is_empty() {
                    return Ok((None, None));
                }
                let mut last = None;
                let mut order: Vec<usize> = (0..samples.len()).collect();
                for _ in 0..self.cfg.policy_epochs {
                    order.shuffle(&mut rng);
                    for chunk in order.chunks(self.cfg.batch_size) {
                        let batch: Vec<PolicySample> = chunk.iter().map(|&i| samples[i].clone()).collect();
                        last = Some(self.state.policy.imitation_update(&mut self.state.policy_opt, &batch)?);
                    }
                }
                Ok((last, None))
            }
            Operator::Ppo => {
                let samples: Vec<PpoSample> = trajs
                    .iter()
                    .flat_map(|t| {
                        t.steps.iter().map(move |s| {
                            let taken = s.legal.iter().position(|&a| a == s.chosen).expect("chosen is legal");
                            PpoSample {
                                features: env.policy_features(&s.state, &t.goal),
                                legal: s.legal.clone(),
                                taken,
                                old_logp: s.improved_policy[taken].max(f64::MIN_POSITIVE).ln(),
                                advantage: s.ret - s.q_root,
                                ret: s.ret,
                            }
                        })
                    })
                    .collect();
                if samples.is_empty() {
                    return Ok((None, None));
                }
                let mut samples = samples;
                normalize_advantages(&mut samples);
                let mut last = None;
                let mut order: Vec<usize> = (0..samples.len()).collect();
                for _ in 0..self.cfg.ppo_epochs {
                    order.shuffle(&mut rng);
                    for chunk in order.chunks(self.cfg.batch_size) {
                        let batch: Vec<PpoSample> = chunk.iter().map(|&i| samples[i].clone()).collect();
                        last = Some(ppo_update(&mut self.state.policy, &mut self.state.policy_opt, &batch, &self.cfg.ppo)?);
                    }
                }
                Ok((None, last))
            }
        }
    }

    fn reward_phase(&mut self, iteration: usize) -> Result<Option<RewardLosses>> {
        if !self.cfg.adversarial || self.state.negatives.is_empty() || self.data.positives.is_empty() {
            return Ok(None);
        }
        let env = self.env;
        let mut rng = rng_for(&[self.cfg.seed, TAG_REWARD, iteration as u64]);
        let mut last = None;
        for _ in 0..self.cfg.reward_steps {
            let pos: Vec<RewardPair> = (0..self.cfg.reward_batch)
                .map(|_| {
                    let e = &self.data.positives[rng.random_range(0..self.data.positives.len())];
                    RewardModel::pair(env, &e.state, &e.goal)
                })
                .collect();
            let neg: Vec<RewardPair> = (0..self.cfg.reward_batch)
                .map(|_| {
                    let e = &self.state.negatives[rng.random_range(0..self.state.negatives.len())];
                    RewardModel::pair(env, &e.state, &e.goal)
                })
                .collect();
            last = Some(self.state.reward.update(
                &mut self.state.reward_opt,
                &pos,
                &neg,
                self.cfg.lambda,
                self.cfg.temperature,
            )?);
        }
        Ok(last)
    }

    /// Reward-model AUC separating held-out positives from `negatives`.
    pub fn reward_auc(&self, negatives: &[Example<E::State, E::Goal>]) -> Result<Option<f64>> {
        reward_auc(self.env, &self.state.reward, &self.data.heldout, negatives)
    }

    /// One pass of the loop: generate, improve the policy, refine the reward.
    pub fn iterate(&mut self) -> Result<IterationReport> {
        let it = self.state.iteration;
        let trajs = self.selfplay(it)?;
        let n = trajs.len() as f64;
        let env = self.env;
        let fresh: Vec<Example<E::State, E::Goal>> = trajs
            .iter()
            .filter(|t| env.is_complete(&t.final_state))
            .map(|t| Example { goal: t.goal.clone(), state: t.final_state.clone() })
            .collect();
        let mean_terminal_reward = trajs.iter().map(|t| t.terminal_reward).sum::<f64>() / n;
        let success_rate = trajs.iter().filter(|t| env.is_success(&t.final_state, &t.goal)).count() as f64 / n;
        let validity_rate = trajs.iter().filter(|t| env.is_valid(&t.final_state)).count() as f64 / n;
        let dead_end_rate = trajs.iter().filter(|t| t.dead_end).count() as f64 / n;
        if let Some(dir) = &self.run_dir {
            let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("trajectories").join(format!("{it:03}.jsonl")))?);
            for t in &trajs {
                crate::search::write_trajectory_log(env, t, &mut f)?;
            }
        }
        for e in &fresh {
            if self.state.negatives.len() == self.cfg.negative_capacity {
                self.state.negatives.pop_front();
            }
            self.state.negatives.push_back(e.clone());
        }
        // Scored before refinement, so the negatives are unseen by the model.
        let failures: Vec<_> = fresh.iter().filter(|e| !env.is_success(&e.state, &e.goal)).cloned().collect();
        let auc = self.reward_auc(&failures)?;
        let (policy, ppo) = self.policy_phase(it, &trajs)?;
        let reward = self.reward_phase(it)?;
        self.state.episodes_total += trajs.len();
        let report = IterationReport {
            iteration: it,
            episodes_total: self.state.episodes_total,
            mean_terminal_reward,
            success_rate,
            validity_rate,
            dead_end_rate,
            auc,
            policy,
            ppo,
            reward,
            negatives: self.state.negatives.len(),
        };
        log::info!("iteration {it}: {report:?}");
        self.state.reports.push(report.clone());
        self.state.iteration += 1;
        if let Some(dir) = self.run_dir.clone() {
            save_checkpoint(&dir.join("checkpoints").join(format!("{it:03}.json")), &self.cfg, &self.state)?;
            let mut line = serde_json::to_string(&report)?;
            line.push('\n');
            use std::io::Write;
            std::fs::OpenOptions::new().create(true).append(true).open(dir.join("reports.jsonl"))?.write_all(line.as_bytes())?;
        }
        Ok(report)
    }

    fn plateaued(&self) -> bool {
        let w = self.cfg.plateau_window;
        let r = &self.state.reports;
        w > 0 && r.len() > w && r[r.len() - 1].mean_terminal_reward - r[r.len() - 1 - w].mean_terminal_reward < self.cfg.plateau_tol
    }

    /// Runs iterations until the configured count or a reward plateau.
    pub fn train(&mut self) -> Result<Vec<IterationReport>> {
        while self.state.iteration < self.cfg.iterations {
            self.iterate()?;
            if self.plateaued() {
                log::info!("stopping at iteration {}: terminal reward plateau", self.state.iteration);
                break;
            }
        }
        Ok(self.state.reports.clone())
    }
}

#[cfg(test)]
mod tests;
