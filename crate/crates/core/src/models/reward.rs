use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    add_into, check_finite, dot, log_sigmoid, sigmoid, sparse_affine, sparse_affine_backward, zeros_like, Adam,
    Params, Tensor,
};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::search::TerminalScore;

const STATE: usize = 0;
const GOAL: usize = 4;
const LOG_SCALE: usize = 8;
const NORM_EPS: f64 = 1e-8;

/// Two-tower scorer: `r = exp(log_scale) * cos(v, w)` where `v` embeds the
/// state and `w` the goal, each through one tanh hidden layer.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct RewardModel {
    pub state_dim: usize,
    pub goal_dim: usize,
    pub hidden: usize,
    pub emb: usize,
    pub params: Params,
}

/// Feature vectors of one (state, goal) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardPair {
    pub state: Vec<f64>,
    pub goal: Vec<f64>,
}

struct Tower {
    h: Vec<f64>,
    v: Vec<f64>,
    norm: f64,
}

impl Tower {
    fn unit(&self) -> Vec<f64> {
        self.v.iter().map(|x| x / self.norm).collect()
    }

    /// Gradient w.r.t. the raw embedding from one w.r.t. its normalization.
    fn unnormalize(&self, du: &[f64]) -> Vec<f64> {
        let vd = dot(&self.v, du);
        let n3 = self.norm.powi(3);
        self.v.iter().zip(du).map(|(v, d)| d / self.norm - v * vd / n3).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardLosses {
    pub pref: f64,
    pub cont: f64,
    pub total: f64,
}

impl RewardModel {
    pub const DEFAULT_HIDDEN: usize = 128;
    pub const DEFAULT_EMB: usize = 64;

    pub fn new<R: Rng>(state_dim: usize, goal_dim: usize, hidden: usize, emb: usize, rng: &mut R) -> RewardModel {
        let mut params = Vec::new();
        for d in [state_dim, goal_dim] {
            params.push(Tensor::glorot(&[d, hidden], d, hidden, rng));
            params.push(Tensor::zeros(&[hidden]));
            params.push(Tensor::glorot(&[emb, hidden], hidden, emb, rng));
            params.push(Tensor::zeros(&[emb]));
        }
        params.push(Tensor { dims: vec![1], data: vec![10f64.ln()] });
        RewardModel { state_dim, goal_dim, hidden, emb, params }
    }

    pub fn zeros(state_dim: usize, goal_dim: usize, hidden: usize, emb: usize) -> RewardModel {
        let mut params = Vec::new();
        for d in [state_dim, goal_dim] {
            params.push(Tensor::zeros(&[d, hidden]));
            params.push(Tensor::zeros(&[hidden]));
            params.push(Tensor::zeros(&[emb, hidden]));
            params.push(Tensor::zeros(&[emb]));
        }
        params.push(Tensor::zeros(&[1]));
        RewardModel { state_dim, goal_dim, hidden, emb, params }
    }

    pub fn for_env<E: Environment, R: Rng>(env: &E, rng: &mut R) -> RewardModel {
        RewardModel::new(env.state_dim(), env.goal_dim(), Self::DEFAULT_HIDDEN, Self::DEFAULT_EMB, rng)
    }

    pub fn pair<E: Environment>(env: &E, s: &E::State, g: &E::Goal) -> RewardPair {
        RewardPair { state: env.state_features(s), goal: env.goal_features(g) }
    }

    fn tower(&self, off: usize, x: &[f64]) -> Tower {
        let p = &self.params;
        let h: Vec<f64> = sparse_affine(&p[off], &p[off + 1], x).into_iter().map(f64::tanh).collect();
        let hd = self.hidden;
        let v: Vec<f64> =
            (0..self.emb).map(|k| p[off + 3].data[k] + dot(&p[off + 2].data[k * hd..(k + 1) * hd], &h)).collect();
        let norm = (dot(&v, &v) + NORM_EPS).sqrt();
        Tower { h, v, norm }
    }

    fn tower_backward(&self, off: usize, x: &[f64], t: &Tower, dv: &[f64], g: &mut Params) {
        let hd = self.hidden;
        let p = &self.params;
        let mut dh = vec![0.0; hd];
        for (k, &d) in dv.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let w = &p[off + 2].data[k * hd..(k + 1) * hd];
            let gw = &mut g[off + 2].data[k * hd..(k + 1) * hd];
            for j in 0..hd {
                gw[j] += d * t.h[j];
                dh[j] += d * w[j];
            }
            g[off + 3].data[k] += d;
        }
        let dpre: Vec<f64> = dh.iter().zip(&t.h).map(|(d, h)| d * (1.0 - h * h)).collect();
        let (a, b) = g.split_at_mut(off + 1);
        sparse_affine_backward(&mut a[off], &mut b[0], x, &dpre);
    }

    fn check(&self, pr: &RewardPair) -> Result<()> {
        if pr.state.len() != self.state_dim {
            return Err(Error::Dimension { expected: self.state_dim, got: pr.state.len() });
        }
        if pr.goal.len() != self.goal_dim {
            return Err(Error::Dimension { expected: self.goal_dim, got: pr.goal.len() });
        }
        Ok(())
    }

    /// Score plus the raw state and goal embeddings.
    pub fn forward(&self, pr: &RewardPair) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        self.check(pr)?;
        let ts = self.tower(STATE, &pr.state);
        let tg = self.tower(GOAL, &pr.goal);
        let r = self.params[LOG_SCALE].data[0].exp() * dot(&ts.unit(), &tg.unit());
        Ok((r, ts.v, tg.v))
    }

    pub fn score(&self, pr: &RewardPair) -> Result<f64> {
        Ok(self.forward(pr)?.0)
    }

    /// Backpropagates `dr` through one score evaluation.
    fn score_backward(&self, pr: &RewardPair, dr: f64, g: &mut Params) -> f64 {
        let ts = self.tower(STATE, &pr.state);
        let tg = self.tower(GOAL, &pr.goal);
        let (us, ug) = (ts.unit(), tg.unit());
        let s = self.params[LOG_SCALE].data[0].exp();
        let r = s * dot(&us, &ug);
        g[LOG_SCALE].data[0] += dr * r;
        let du_s: Vec<f64> = ug.iter().map(|x| dr * s * x).collect();
        let du_g: Vec<f64> = us.iter().map(|x| dr * s * x).collect();
        self.tower_backward(STATE, &pr.state, &ts, &ts.unnormalize(&du_s), g);
        self.tower_backward(GOAL, &pr.goal, &tg, &tg.unnormalize(&du_g), g);
        r
    }

    /// Binary cross-entropy with dataset pairs as positives and generated
    /// pairs as negatives, each side averaged over its own count.
    pub fn loss_pref(&self, pos: &[RewardPair], neg: &[RewardPair]) -> Result<(f64, Params)> {
        if pos.is_empty() || neg.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for p in pos.iter().chain(neg) {
            self.check(p)?;
        }
        let (np, nn) = (1.0 / pos.len() as f64, 1.0 / neg.len() as f64);
        let items: Vec<(&RewardPair, bool)> = pos.iter().map(|p| (p, true)).chain(neg.iter().map(|p| (p, false))).collect();
        let parts: Vec<(f64, Params)> = items
            .par_chunks(32)
            .map(|chunk| {
                let mut g = zeros_like(&self.params);
                let mut loss = 0.0;
                for (pr, positive) in chunk {
                    let r = self.score(pr).expect("checked");
                    if *positive {
                        loss -= np * log_sigmoid(r);
                        self.score_backward(pr, -np * (1.0 - sigmoid(r)), &mut g);
                    } else {
                        loss -= nn * log_sigmoid(-r);
                        self.score_backward(pr, nn * sigmoid(r), &mut g);
                    }
                }
                (loss, g)
            })
            .collect();
        let mut grads = zeros_like(&self.params);
        let mut loss = 0.0;
        for (l, g) in parts {
            loss += l;
            add_into(&mut grads, &g);
        }
        Ok((check_finite("preference loss", loss)?, grads))
    }

    /// Symmetric InfoNCE over the in-batch similarity matrix of unit
    /// embeddings at temperature `t`.
    pub fn loss_cont(&self, batch: &[RewardPair], t: f64) -> Result<(f64, Params)> {
        let n = batch.len();
        if n < 2 {
            return Err(Error::InsufficientSamples(format!("contrastive batch of {n}")));
        }
        for p in batch {
            self.check(p)?;
        }
        let ts: Vec<Tower> = batch.par_iter().map(|p| self.tower(STATE, &p.state)).collect();
        let tg: Vec<Tower> = batch.par_iter().map(|p| self.tower(GOAL, &p.goal)).collect();
        let us: Vec<Vec<f64>> = ts.iter().map(Tower::unit).collect();
        let ug: Vec<Vec<f64>> = tg.iter().map(Tower::unit).collect();
        let logits: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| dot(&us[i], &ug[j]) / t).collect()).collect();
        let inv_n = 1.0 / n as f64;
        let mut dl = vec![vec![0.0; n]; n];
        let mut loss = 0.0;
        for i in 0..n {
            let row = &logits[i];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|x| (x - m).exp()).sum();
            loss += inv_n * (m + z.ln() - row[i]);
            for j in 0..n {
                dl[i][j] += inv_n * ((row[j] - m).exp() / z - (i == j) as u8 as f64);
            }
        }
        for j in 0..n {
            let m = (0..n).map(|i| logits[i][j]).fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = (0..n).map(|i| (logits[i][j] - m).exp()).sum();
            loss += inv_n * (m + z.ln() - logits[j][j]);
            for i in 0..n {
                dl[i][j] += inv_n * ((logits[i][j] - m).exp() / z - (i == j) as u8 as f64);
            }
        }
        let emb = self.emb;
        let mut dus = vec![vec![0.0; emb]; n];
        let mut dug = vec![vec![0.0; emb]; n];
        for i in 0..n {
            for j in 0..n {
                let d = dl[i][j] / t;
                for k in 0..emb {
                    dus[i][k] += d * ug[j][k];
                    dug[j][k] += d * us[i][k];
                }
            }
        }
        let parts: Vec<Params> = (0..n)
            .collect::<Vec<_>>()
            .par_chunks(32)
            .map(|chunk| {
                let mut g = zeros_like(&self.params);
                for &i in chunk {
                    self.tower_backward(STATE, &batch[i].state, &ts[i], &ts[i].unnormalize(&dus[i]), &mut g);
                    self.tower_backward(GOAL, &batch[i].goal, &tg[i], &tg[i].unnormalize(&dug[i]), &mut g);
                }
                g
            })
            .collect();
        let mut grads = zeros_like(&self.params);
        for g in parts {
            add_into(&mut grads, &g);
        }
        Ok((check_finite("contrastive loss", loss)?, grads))
    }

    /// `L_pref + lambda * L_cont` with its gradient. The contrastive term is
    /// skipped when `lambda` is zero or the batch is too small.
    pub fn combined_loss(
        &self,
        pos: &[RewardPair],
        neg: &[RewardPair],
        lambda: f64,
        t: f64,
    ) -> Result<(RewardLosses, Params)> {
        let (pref, mut g) = self.loss_pref(pos, neg)?;
        let mut cont = 0.0;
        if lambda != 0.0 && pos.len() >= 2 {
            let (c, gc) = self.loss_cont(pos, t)?;
            cont = c;
            for (a, b) in g.iter_mut().zip(&gc) {
                for (x, y) in a.data.iter_mut().zip(&b.data) {
                    *x += lambda * y;
                }
            }
        }
        Ok((RewardLosses { pref, cont, total: pref + lambda * cont }, g))
    }

    pub fn update(&mut self, opt: &mut Adam, pos: &[RewardPair], neg: &[RewardPair], lambda: f64, t: f64) -> Result<RewardLosses> {
        let (l, g) = self.combined_loss(pos, neg, lambda, t)?;
        opt.step(&mut self.params, &g)?;
        Ok(l)
    }

    pub fn cont_update(&mut self, opt: &mut Adam, batch: &[RewardPair], t: f64) -> Result<f64> {
        let (l, g) = self.loss_cont(batch, t)?;
        opt.step(&mut self.params, &g)?;
        Ok(l)
    }
}

/// Fraction of pairs whose own goal outscores `candidates - 1` other goals
/// drawn from the distinct goals present in `pairs`.
pub fn retrieval_accuracy<R: Rng>(model: &RewardModel, pairs: &[RewardPair], candidates: usize, rng: &mut R) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut goals: Vec<&Vec<f64>> = Vec::new();
    for p in pairs {
        if !goals.iter().any(|g| *g == &p.goal) {
            goals.push(&p.goal);
        }
    }
    if goals.len() < candidates {
        return Err(Error::InsufficientSamples(format!("{} distinct goals for {candidates} candidates", goals.len())));
    }
    let mut hits = 0usize;
    for p in pairs {
        let own = model.score(p)?;
        let mut others: Vec<&&Vec<f64>> = goals.iter().filter(|g| ***g != p.goal).collect();
        others.shuffle(rng);
        let mut best = true;
        for g in others.into_iter().take(candidates - 1) {
            let s = model.score(&RewardPair { state: p.state.clone(), goal: (*g).clone() })?;
            if s >= own {
                best = false;
                break;
            }
        }
        hits += best as usize;
    }
    Ok(hits as f64 / pairs.len() as f64)
}

/// Terminal score `sigmoid(r)` from a learned reward model.
pub struct LearnedScore<'a>(pub &'a RewardModel);

impl<E: Environment> TerminalScore<E> for LearnedScore<'_> {
    fn score(&self, env: &E, s: &E::State, g: &E::Goal) -> Result<f64> {
        Ok(sigmoid(self.0.score(&RewardModel::pair(env, s, g))?))
    }
}
