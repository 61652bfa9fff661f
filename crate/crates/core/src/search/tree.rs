use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argtop, gumbel_topk, sigma_transform, softmax, Evaluator, SearchParams, TerminalScore};
use crate::env::Environment;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
struct Edge {
    reward: f64,
    child: Option<usize>,
}

struct Node<S> {
    state: S,
    legal: Vec<usize>,
    logits: Vec<f64>,
    value: f64,
    visits: Vec<u32>,
    q: Vec<f64>,
    edges: Vec<Option<Edge>>,
}

impl<S> Node<S> {
    fn max_visits(&self) -> u32 {
        self.visits.iter().copied().max().unwrap_or(0)
    }

    fn total_visits(&self) -> u32 {
        self.visits.iter().sum()
    }
}

/// Outcome of one search from a root state. Per-action vectors are aligned
/// with `legal`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub chosen_action: usize,
    pub root_value: f64,
    pub prior_value: f64,
    pub legal: Vec<usize>,
    pub prior_logits: Vec<f64>,
    pub improved_policy: Vec<f64>,
    pub visit_counts: Vec<u32>,
    pub q_values: Vec<f64>,
    pub simulations: u32,
}

impl SearchResult {
    pub fn visited_actions(&self) -> usize {
        self.visit_counts.iter().filter(|&&n| n > 0).count()
    }
}

/// One search tree over a fixed goal.
pub struct Search<'a, E: Environment, V, T> {
    env: &'a E,
    evaluator: &'a V,
    terminal: &'a T,
    params: SearchParams,
    goal: &'a E::Goal,
    nodes: Vec<Node<E::State>>,
    pub evaluations: usize,
}

impl<'a, E, V, T> Search<'a, E, V, T>
where
    E: Environment,
    V: Evaluator<E>,
    T: TerminalScore<E>,
{
    pub fn new(env: &'a E, evaluator: &'a V, terminal: &'a T, params: SearchParams, goal: &'a E::Goal) -> Result<Self> {
        params.validate()?;
        Ok(Search { env, evaluator, terminal, params, goal, nodes: Vec::new(), evaluations: 0 })
    }

    fn expand(&mut self, state: E::State) -> Result<usize> {
        let legal = self.env.legal_actions(&state);
        let (logits, value) = if legal.is_empty() {
            // Dead end: incomplete and stuck, worth nothing.
            (Vec::new(), 0.0)
        } else {
            self.evaluations += 1;
            let (l, v) = self.evaluator.evaluate(self.env, &state, self.goal, &legal)?;
            if l.len() != legal.len() {
                return Err(Error::Dimension { expected: legal.len(), got: l.len() });
            }
            if !v.is_finite() || l.iter().any(|x| x.is_nan()) {
                return Err(Error::NonFinite("evaluator output".into()));
            }
            (l, v)
        };
        let n = legal.len();
        self.nodes.push(Node { state, legal, logits, value, visits: vec![0; n], q: vec![0.0; n], edges: vec![None; n] });
        Ok(self.nodes.len() - 1)
    }

    /// Follows edge `i` of `node`, expanding the child on first visit, and
    /// backs the return up into `(node, i)`.
    fn traverse(&mut self, node: usize, i: usize, depth: u32) -> Result<f64> {
        let mut fresh = false;
        let edge = match self.nodes[node].edges[i] {
            Some(e) => e,
            None => {
                let a = self.nodes[node].legal[i];
                let tr = self.env.step(&self.nodes[node].state, a)?;
                let mut reward = tr.reward;
                if tr.done && self.env.is_complete(&tr.state) {
                    reward += self.terminal.score(self.env, &tr.state, self.goal)?;
                }
                let child = if tr.done || self.params.cutoff(depth + 1) {
                    None
                } else {
                    fresh = true;
                    Some(self.expand(tr.state)?)
                };
                let e = Edge { reward, child };
                self.nodes[node].edges[i] = Some(e);
                e
            }
        };
        let tail = match edge.child {
            None => 0.0,
            Some(c) if fresh => self.nodes[c].value,
            Some(c) => self.simulate(c, depth + 1)?,
        };
        let ret = edge.reward + self.params.gamma * tail;
        let n = &mut self.nodes[node];
        n.visits[i] += 1;
        n.q[i] += (ret - n.q[i]) / n.visits[i] as f64;
        Ok(ret)
    }

    /// Non-root selection: argmax of `softmax(logits + sigma(q)) - N/(1+sum N)`.
    fn select(&self, node: usize) -> usize {
        let n = &self.nodes[node];
        let maxn = n.max_visits();
        let scores: Vec<f64> =
            n.logits.iter().zip(&n.q).map(|(l, q)| l + sigma_transform(*q, maxn, &self.params)).collect();
        let pi = softmax(&scores);
        let denom = 1.0 + n.total_visits() as f64;
        let sel: Vec<f64> = pi.iter().zip(&n.visits).map(|(p, v)| p - *v as f64 / denom).collect();
        argtop(&sel, 1)[0]
    }

    fn simulate(&mut self, node: usize, depth: u32) -> Result<f64> {
        if self.params.cutoff(depth) || self.nodes[node].legal.is_empty() {
            return Ok(0.0);
        }
        let i = self.select(node);
        self.traverse(node, i, depth)
    }

    /// Sequential Halving with Gumbel at `root`.
    pub fn run<R: Rng>(&mut self, root: &E::State, rng: &mut R) -> Result<SearchResult> {
        self.nodes.clear();
        let r = self.expand(root.clone())?;
        let nleg = self.nodes[r].legal.len();
        if nleg == 0 {
            return Err(Error::DeadEnd);
        }
        let k = (self.params.k as usize).min(nleg);
        let logits = self.nodes[r].logits.clone();
        let (mut seq, noise) = gumbel_topk(&logits, k, self.params.g_scale, rng)?;
        let mut sims = 0u32;
        if nleg > 1 {
            let log2k = (k as f64).log2();
            let budget = self.params.n as f64;
            let per_phase = move |m: usize| ((budget /(m as f64 * log2k)).floor() as u32).max(1);
            // Every phase ranks at the visit count the winner ends with, so
            // eliminations and the final choice agree on one score.
            let mut maxn = 0;
            let mut m = k;
            while m > 1 {
                maxn += per_phase(m);
                m = m.div_ceil(2);
            }
            while seq.len() > 1 {
                let per = per_phase(seq.len());
                for &i in &seq {
                    for _ in 0..per {
                        self.traverse(r, i, 0)?;
                        sims += 1;
                    }
                }
                let scores: Vec<f64> = seq
                    .iter()
                    .map(|&i| noise[i] + logits[i] + sigma_transform(self.nodes[r].q[i], maxn, &self.params))
                    .collect();
                let keep = seq.len().div_ceil(2);
                // argtop ranks positions in `seq`; equal scores keep the lower action id.
                let mut order: Vec<usize> = (0..seq.len()).collect();
                order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(seq[a].cmp(&seq[b])));
                seq = order[..keep].iter().map(|&p| seq[p]).collect();
            }
        }
        let chosen = seq[0];
        let root = &self.nodes[r];
        let total = root.total_visits();
        let root_value = if total > 0 {
            root.q.iter().zip(&root.visits).map(|(q, n)| q * *n as f64).sum::<f64>() / total as f64
        } else {
            root.value
        };
        let maxn = root.max_visits();
        let completed: Vec<f64> = root
            .logits
            .iter()
            .zip(root.q.iter().zip(&root.visits))
            .map(|(l, (q, n))| l + sigma_transform(if *n > 0 { *q } else { root.value }, maxn, &self.params))
            .collect();
        Ok(SearchResult {
            chosen_action: root.legal[chosen],
            root_value,
            prior_value: root.value,
            legal: root.legal.clone(),
            prior_logits: root.logits.clone(),
            improved_policy: softmax(&completed),
            visit_counts: root.visits.clone(),
            q_values: root.q.clone(),
            simulations: sims,
        })
    }
}
