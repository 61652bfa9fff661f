use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{softmax, Evaluator, Search, SearchParams, SearchResult, TerminalScore};
use crate::env::{Environment, Instance};
use crate::error::{Error, Result};

/// One decision along a planned episode.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: serde::de::DeserializeOwned"))]
pub struct PlanStep<S> {
    pub state: S,
    pub legal: Vec<usize>,
    pub chosen: usize,
    /// Search improved policy aligned with `legal`.
    pub improved_policy: Vec<f64>,
    pub visited: usize,
    pub q_root: f64,
    pub reward: f64,
    /// Discounted return from this step to the end of the episode.
    pub ret: f64,
}

impl<S> PlanStep<S> {
    /// Imitation target over `legal`: the improved policy, or the one-hot
    /// chosen action when fewer than two root actions were visited.
    pub fn policy_target(&self) -> Vec<f64> {
        if self.visited >= 2 {
            self.improved_policy.clone()
        } else {
            self.legal.iter().map(|&a| (a == self.chosen) as u8 as f64).collect()
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(
    serialize = "S: Serialize, G: Serialize",
    deserialize = "S: serde::de::DeserializeOwned, G: serde::de::DeserializeOwned"
))]
pub struct PlanTrajectory<S, G> {
    pub goal: G,
    pub steps: Vec<PlanStep<S>>,
    pub final_state: S,
    /// Terminal score from the configured source (0 for failed episodes).
    pub terminal_reward: f64,
    pub dead_end: bool,
}

impl<S, G> PlanTrajectory<S, G> {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

fn fill_returns<S>(steps: &mut [PlanStep<S>], gamma: f64) {
    let mut acc = 0.0;
    for s in steps.iter_mut().rev() {
        acc = s.reward + gamma * acc;
        s.ret = acc;
    }
}

/// Plans an episode by running a fresh search at every reached state.
pub fn run_episode<E, V, T, R>(
    env: &E,
    evaluator: &V,
    terminal: &T,
    params: SearchParams,
    instance: &Instance<E::State, E::Goal>,
    rng: &mut R,
) -> Result<PlanTrajectory<E::State, E::Goal>>
where
    E: Environment,
    V: Evaluator<E>,
    T: TerminalScore<E>,
    R: Rng,
{
    let mut search = Search::new(env, evaluator, terminal, params, &instance.goal)?;
    let mut s = instance.initial.clone();
    let mut steps = Vec::new();
    let mut terminal_reward = 0.0;
    let mut dead_end = false;
    loop {
        let res: SearchResult = match search.run(&s, rng) {
            Ok(r) => r,
            Err(Error::DeadEnd) => {
                dead_end = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let tr = env.step(&s, res.chosen_action)?;
        let mut reward = tr.reward;
        if tr.done && env.is_complete(&tr.state) {
            terminal_reward = terminal.score(env, &tr.state, &instance.goal)?;
            reward += terminal_reward;
        }
        let visited = res.visited_actions();
        steps.push(PlanStep {
            state: s,
            legal: res.legal,
            chosen: res.chosen_action,
            improved_policy: res.improved_policy,
            visited,
            q_root: res.root_value,
            reward,
            ret: 0.0,
        });
        s = tr.state;
        if tr.done {
            break;
        }
    }
    fill_returns(&mut steps, params.gamma);
    Ok(PlanTrajectory { goal: instance.goal.clone(), steps, final_state: s, terminal_reward, dead_end })
}

/// How a policy picks actions without search.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub enum Sampling {
    Greedy,
    Temperature(f64),
}

/// Rolls out the policy alone, sampling from the masked logits.
pub fn policy_rollout<E, V, T, R>(
    env: &E,
    evaluator: &V,
    terminal: &T,
    sampling: Sampling,
    gamma: f64,
    instance: &Instance<E::State, E::Goal>,
    rng: &mut R,
) -> Result<PlanTrajectory<E::State, E::Goal>>
where
    E: Environment,
    V: Evaluator<E>,
    T: TerminalScore<E>,
    R: Rng,
{
    let mut s = instance.initial.clone();
    let mut steps = Vec::new();
    let mut terminal_reward = 0.0;
    let mut dead_end = false;
    loop {
        let legal = env.legal_actions(&s);
        if legal.is_empty() {
            dead_end = true;
            break;
        }
        let (logits, value) = evaluator.evaluate(env, &s, &instance.goal, &legal)?;
        let i = match sampling {
            Sampling::Greedy => super::argtop(&logits, 1)[0],
            Sampling::Temperature(t) => {
                let scaled: Vec<f64> = logits.iter().map(|l| l / t).collect();
                sample_index(&softmax(&scaled), rng)
            }
        };
        let a = legal[i];
        let tr = env.step(&s, a)?;
        let mut reward = tr.reward;
        if tr.done && env.is_complete(&tr.state) {
            terminal_reward = terminal.score(env, &tr.state, &instance.goal)?;
            reward += terminal_reward;
        }
        let probs = softmax(&logits);
        steps.push(PlanStep { state: s, legal, chosen: a, improved_policy: probs, visited: 1, q_root: value, reward, ret: 0.0 });
        s = tr.state;
        if tr.done {
            break;
        }
    }
    fill_returns(&mut steps, gamma);
    Ok(PlanTrajectory { goal: instance.goal.clone(), steps, final_state: s, terminal_reward, dead_end })
}

pub fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random_range(0.0..1.0);
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Counter-based seed for a task identified by `parts`.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let bytes: Vec<u8> = parts.iter().flat_map(|p| p.to_le_bytes()).collect();
    crate::geometry::digest64(&bytes)
}

#[derive(Serialize)]
struct LogRecord {
    state_digest: String,
    legal_count: usize,
    chosen: usize,
    improved_policy: std::collections::BTreeMap<usize, f64>,
    q_root: f64,
    reward: f64,
}

/// Writes one JSON line per step; the policy map keeps entries above 1e-4.
pub fn write_trajectory_log<E: Environment, W: Write>(
    env: &E,
    traj: &PlanTrajectory<E::State, E::Goal>,
    out: &mut W,
) -> Result<()> {
    for s in &traj.steps {
        let rec = LogRecord {
            state_digest: env.state_digest(&s.state),
            legal_count: s.legal.len(),
            chosen: s.chosen,
            improved_policy: s
                .legal
                .iter()
                .zip(&s.improved_policy)
                .filter(|(_, p)| **p > 1e-4)
                .map(|(a, p)| (*a, *p))
                .collect(),
            q_root: s.q_root,
            reward: s.reward,
        };
        serde_json::to_writer(&mut *out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
