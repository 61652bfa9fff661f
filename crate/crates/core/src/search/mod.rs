//! Gumbel MuZero search: Gumbel-Top-k root sampling, Sequential Halving and
//! the non-root selection rule, over any [`Environment`](crate::env::Environment).

mod episode;
mod tree;

pub use episode::*;
pub use tree::*;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchParams {
    /// Simulation budget.
    pub n: u32,
    /// Root actions sampled.
    pub k: u32,
    /// Multiplier on the Gumbel noise; 0 is deterministic.
    pub g_scale: f64,
    pub c_visit: f64,
    pub c_scale: f64,
    pub gamma: f64,
    /// Cutoff on `gamma^depth`; used only when `gamma < 1`.
    pub eps_depth: f64,
    pub max_depth: u32,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams { n: 64, k: 16, g_scale: 1.0, c_visit: 50.0, c_scale: 0.1, gamma: 1.0, eps_depth: 1e-3, max_depth: 12 }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.k >= 1
            && self.n >= self.k
            && self.g_scale >= 0.0
            && self.gamma > 0.0
            && self.gamma <= 1.0
            && self.eps_depth > 0.0
            && self.eps_depth < 1.0
            && self.c_scale >= 0.0
            && self.max_depth >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("search parameters {self:?}")))
        }
    }

    pub(crate) fn cutoff(&self, depth: u32) -> bool {
        if self.gamma < 1.0 {
            self.gamma.powi(depth as i32) < self.eps_depth
        } else {
            depth >= self.max_depth
        }
    }
}

/// Policy and value provider. Logits are returned for `legal` only, in the
/// same order.
pub trait Evaluator<E: Environment>: Sync {
    fn evaluate(&self, env: &E, s: &E::State, g: &E::Goal, legal: &[usize]) -> Result<(Vec<f64>, f64)>;
}

/// Score added on reaching a complete state.
pub trait TerminalScore<E: Environment>: Sync {
    fn score(&self, env: &E, s: &E::State, g: &E::Goal) -> Result<f64>;
}

/// The environment's exact goal predicate.
#[derive(Clone, Copy, Debug, Default)]
pub struct OracleScore;

impl<E: Environment> TerminalScore<E> for OracleScore {
    fn score(&self, env: &E, s: &E::State, g: &E::Goal) -> Result<f64> {
        Ok(env.oracle_score(s, g))
    }
}

/// Uniform logits and zero value.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformEvaluator;

impl<E: Environment> Evaluator<E> for UniformEvaluator {
    fn evaluate(&self, _: &E, _: &E::State, _: &E::Goal, legal: &[usize]) -> Result<(Vec<f64>, f64)> {
        Ok((vec![0.0; legal.len()], 0.0))
    }
}

pub fn sample_gumbel<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    -(-u.ln()).ln()
}

/// Indices of the `k` largest scores, descending; ties go to the lower index.
pub fn argtop(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Samples `k` distinct actions without replacement by perturbing `logits`
/// with scaled Gumbel noise. Masked entries are `-inf`.
///
/// Returns the chosen ids and the scaled noise drawn for every entry.
pub fn gumbel_topk<R: Rng>(logits: &[f64], k: usize, g_scale: f64, rng: &mut R) -> Result<(Vec<usize>, Vec<f64>)> {
    let finite = logits.iter().filter(|l| l.is_finite()).count();
    if k > finite {
        return Err(Error::InvalidArgument(format!("k={k} exceeds {finite} legal actions")));
    }
    let noise: Vec<f64> = logits.iter().map(|_| g_scale * sample_gumbel(rng)).collect();
    let scores: Vec<f64> =
        logits.iter().zip(&noise).map(|(l, g)| if l.is_finite() { l + g } else { f64::NEG_INFINITY }).collect();
    Ok((argtop(&scores, k), noise))
}

/// `(c_visit + max_visits) * c_scale * q`.
pub fn sigma_transform(q: f64, max_visits: u32, params: &SearchParams) -> f64 {
    (params.c_visit + max_visits as f64) * params.c_scale * q
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return vec![1.0 / x.len() as f64; x.len()];
    }
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}
