//! The environment contract shared by the search, the trainers and the metrics.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Debug)]
pub struct Transition<S> {
    pub state: S,
    /// Geometric reward only; terminal goal scores are added by the caller.
    pub reward: f64,
    pub done: bool,
}

/// One problem: a goal specification and the state generation starts from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(
    serialize = "S: Serialize, G: Serialize",
    deserialize = "S: DeserializeOwned, G: DeserializeOwned"
))]
pub struct Instance<S, G> {
    pub goal: G,
    pub initial: S,
}

/// A (goal, state) pair; dataset positives and generated negatives alike.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(
    serialize = "S: Serialize, G: Serialize",
    deserialize = "S: DeserializeOwned, G: DeserializeOwned"
))]
pub struct Example<S, G> {
    pub goal: G,
    pub state: S,
}

pub trait Environment: Sync + Send {
    type State: Clone + Send + Sync + Serialize + DeserializeOwned + std::fmt::Debug;
    type Goal: Clone + Send + Sync + Serialize + DeserializeOwned + std::fmt::Debug;

    fn name(&self) -> &'static str;
    fn num_actions(&self) -> usize;
    /// Indices of legal actions in ascending order.
    fn legal_actions(&self, s: &Self::State) -> Vec<usize>;
    fn step(&self, s: &Self::State, action: usize) -> Result<Transition<Self::State>>;
    /// All pieces placed; the goal scorer applies only to complete states.
    fn is_complete(&self, s: &Self::State) -> bool;
    fn is_valid(&self, s: &Self::State) -> bool;
    fn is_success(&self, s: &Self::State, g: &Self::Goal) -> bool;
    /// Terminal score from the exact goal predicate.
    fn oracle_score(&self, s: &Self::State, g: &Self::Goal) -> f64;
    fn state_dim(&self) -> usize;
    fn goal_dim(&self) -> usize;
    fn state_features(&self, s: &Self::State) -> Vec<f64>;
    fn goal_features(&self, g: &Self::Goal) -> Vec<f64>;

    /// Policy input: state features followed by goal features.
    fn policy_features(&self, s: &Self::State, g: &Self::Goal) -> Vec<f64> {
        let mut f = self.state_features(s);
        f.extend(self.goal_features(g));
        f
    }

    fn policy_dim(&self) -> usize {
        self.state_dim() + self.goal_dim()
    }

    /// Short stable digest of a state, for logs.
    fn state_digest(&self, s: &Self::State) -> String {
        let bytes = serde_json::to_vec(s).unwrap_or_default();
        format!("{:016x}", crate::geometry::digest64(&bytes))
    }

    fn legal_mask(&self, s: &Self::State) -> Vec<bool> {
        let mut m = vec![false; self.num_actions()];
        for a in self.legal_actions(s) {
            m[a] = true;
        }
        m
    }
}
