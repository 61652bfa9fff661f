use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, Instance};
use crate::error::{Error, Result};
use crate::models::PolicyValueNet;
use crate::search::{derive_seed, policy_rollout, run_episode, PlanTrajectory, Sampling, SearchParams, TerminalScore};

/// How actions are chosen at evaluation time.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub enum Planner {
    Search(SearchParams),
    Policy(Sampling),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub success_rate: f64,
    pub validity_rate: f64,
    pub dead_end_rate: f64,
    pub mean_terminal_reward: f64,
}

pub fn summarize<E: Environment>(env: &E, trajs: &[PlanTrajectory<E::State, E::Goal>]) -> Result<EvalSummary> {
    if trajs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = trajs.len() as f64;
    let rate = |f: &dyn Fn(&PlanTrajectory<E::State, E::Goal>) -> bool| trajs.iter().filter(|t| f(t)).count() as f64 / n;
    Ok(EvalSummary {
        episodes: trajs.len(),
        success_rate: rate(&|t| env.is_success(&t.final_state, &t.goal)),
        validity_rate: rate(&|t| env.is_valid(&t.final_state)),
        dead_end_rate: rate(&|t| t.dead_end),
        mean_terminal_reward: trajs.iter().map(|t| t.terminal_reward).sum::<f64>() / n,
    })
}

/// One episode per instance, in parallel, seeded by `(seed, index)`.
pub fn rollout_all<E, T>(
    env: &E,
    policy: &PolicyValueNet,
    terminal: &T,
    planner: Planner,
    instances: &[Instance<E::State, E::Goal>],
    seed: u64,
) -> Result<Vec<PlanTrajectory<E::State, E::Goal>>>
where
    E: Environment,
    T: TerminalScore<E>,
{
    instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, i as u64]));
            match planner {
                Planner::Search(p) => run_episode(env, policy, terminal, p, inst, &mut rng),
                Planner::Policy(s) => policy_rollout(env, policy, terminal, s, 1.0, inst, &mut rng),
            }
        })
        .collect()
}

pub fn evaluate<E, T>(
    env: &E,
    policy: &PolicyValueNet,
    terminal: &T,
    planner: Planner,
    instances: &[Instance<E::State, E::Goal>],
    seed: u64,
) -> Result<EvalSummary>
where
    E: Environment,
    T: TerminalScore<E>,
{
    summarize(env, &rollout_all(env, policy, terminal, planner, instances, seed)?)
}
