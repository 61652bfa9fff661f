use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    add_into, check_finite, dot, log_softmax, sparse_affine, sparse_affine_backward, zeros_like, Adam, Params, Tensor,
};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::search::Evaluator;

const W1: usize = 0;
const B1: usize = 1;
const WP: usize = 2;
const BP: usize = 3;
const WV: usize = 4;
const BV: usize = 5;

/// One tanh hidden layer feeding an action-logit head and a tanh value head.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct PolicyValueNet {
    pub input_dim: usize,
    pub hidden: usize,
    pub num_actions: usize,
    pub params: Params,
}

pub struct PolicyForward {
    h: Vec<f64>,
    /// Logits for the requested legal actions, in order.
    pub logits: Vec<f64>,
    pub value: f64,
}

/// A supervised example: features, legal set, target distribution over the
/// legal set and a value target.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolicySample {
    pub features: Vec<f64>,
    pub legal: Vec<usize>,
    pub target: Vec<f64>,
    pub ret: f64,
    /// Weight on the value term for this sample; 0 trains the policy only.
    pub value_weight: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyLosses {
    pub ce: f64,
    pub mse: f64,
    pub total: f64,
}

impl PolicyValueNet {
    pub const DEFAULT_HIDDEN: usize = 256;

    pub fn new<R: Rng>(input_dim: usize, hidden: usize, num_actions: usize, rng: &mut R) -> PolicyValueNet {
        let params = vec![
            Tensor::glorot(&[input_dim, hidden], input_dim, hidden, rng),
            Tensor::zeros(&[hidden]),
            Tensor::glorot(&[num_actions, hidden], hidden, num_actions, rng),
            Tensor::zeros(&[num_actions]),
            Tensor::glorot(&[hidden], hidden, 1, rng),
            Tensor::zeros(&[1]),
        ];
        PolicyValueNet { input_dim, hidden, num_actions, params }
    }

    pub fn zeros(input_dim: usize, hidden: usize, num_actions: usize) -> PolicyValueNet {
        let params = vec![
            Tensor::zeros(&[input_dim, hidden]),
            Tensor::zeros(&[hidden]),
            Tensor::zeros(&[num_actions, hidden]),
            Tensor::zeros(&[num_actions]),
            Tensor::zeros(&[hidden]),
            Tensor::zeros(&[1]),
        ];
        PolicyValueNet { input_dim, hidden, num_actions, params }
    }

    /// Zeroes the value head so an untrained net predicts 0 everywhere.
    pub fn zero_value_head(&mut self) {
        for i in [WV, BV] {
            self.params[i].data.fill(0.0);
        }
    }

    pub fn for_env<E: Environment, R: Rng>(env: &E, hidden: usize, rng: &mut R) -> PolicyValueNet {
        PolicyValueNet::new(env.policy_dim(), hidden, env.num_actions(), rng)
    }

    pub fn forward(&self, x: &[f64], legal: &[usize]) -> Result<PolicyForward> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension { expected: self.input_dim, got: x.len() });
        }
        if let Some(&a) = legal.iter().find(|&&a| a >= self.num_actions) {
            return Err(Error::InvalidAction(format!("action {a} beyond {} logits", self.num_actions)));
        }
        let p = &self.params;
        let h: Vec<f64> = sparse_affine(&p[W1], &p[B1], x).into_iter().map(f64::tanh).collect();
        let hd = self.hidden;
        let logits = legal.iter().map(|&a| p[BP].data[a] + dot(&p[WP].data[a * hd..(a + 1) * hd], &h)).collect();
        let value = (dot(&p[WV].data, &h) + p[BV].data[0]).tanh();
        Ok(PolicyForward { h, logits, value })
    }

    /// Full-width logits with illegal entries at `-inf`, plus the value.
    pub fn masked_logits(&self, x: &[f64], mask: &[bool]) -> Result<(Vec<f64>, f64)> {
        if mask.len() != self.num_actions {
            return Err(Error::Dimension { expected: self.num_actions, got: mask.len() });
        }
        let legal: Vec<usize> = (0..mask.len()).filter(|&a| mask[a]).collect();
        let f = self.forward(x, &legal)?;
        let mut out = vec![f64::NEG_INFINITY; self.num_actions];
        for (a, l) in legal.iter().zip(&f.logits) {
            out[*a] = *l;
        }
        Ok((out, f.value))
    }

    /// Accumulates parameter gradients given output gradients.
    pub(crate) fn backward(
        &self,
        x: &[f64],
        legal: &[usize],
        f: &PolicyForward,
        dlogits: &[f64],
        dvalue: f64,
        g: &mut Params,
    ) {
        let hd = self.hidden;
        let p = &self.params;
        let mut dh = vec![0.0; hd];
        for (&a, &dl) in legal.iter().zip(dlogits) {
            if dl == 0.0 {
                continue;
            }
            let w = &p[WP].data[a * hd..(a + 1) * hd];
            let gw = &mut g[WP].data[a * hd..(a + 1) * hd];
            for j in 0..hd {
                gw[j] += dl * f.h[j];
                dh[j] += dl * w[j];
            }
            g[BP].data[a] += dl;
        }
        let dz = dvalue * (1.0 - f.value * f.value);
        if dz != 0.0 {
            for j in 0..hd {
                g[WV].data[j] += dz * f.h[j];
                dh[j] += dz * p[WV].data[j];
            }
            g[BV].data[0] += dz;
        }
        let dpre: Vec<f64> = dh.iter().zip(&f.h).map(|(d, h)| d * (1.0 - h * h)).collect();
        let (head, tail) = g.split_at_mut(B1);
        sparse_affine_backward(&mut head[W1], &mut tail[0], x, &dpre);
    }

    fn sample_loss(&self, s: &PolicySample, inv_n: f64, g: &mut Params) -> Result<(f64, f64)> {
        if s.target.len() != s.legal.len() {
            return Err(Error::Dimension { expected: s.legal.len(), got: s.target.len() });
        }
        let f = self.forward(&s.features, &s.legal)?;
        let lp = log_softmax(&f.logits);
        let ce: f64 = -s.target.iter().zip(&lp).filter(|(t, _)| **t > 0.0).map(|(t, l)| t * l).sum::<f64>();
        let tsum: f64 = s.target.iter().sum();
        let dl: Vec<f64> = lp.iter().zip(&s.target).map(|(l, t)| (tsum * l.exp() - t) * inv_n).collect();
        let err = f.value - s.ret;
        self.backward(&s.features, &s.legal, &f, &dl, s.value_weight * err * inv_n, g);
        Ok((ce, s.value_weight * err * err))
    }

    /// Mean `CE(logits, target) + 0.5 * w * (value - ret)^2` and its gradient.
    pub fn imitation_loss(&self, batch: &[PolicySample]) -> Result<(PolicyLosses, Params)> {
        if batch.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let inv_n = 1.0 / batch.len() as f64;
        let parts: Vec<Result<(f64, f64, Params)>> = batch
            .par_chunks(32)
            .map(|chunk| {
                let mut g = zeros_like(&self.params);
                let (mut ce, mut mse) = (0.0, 0.0);
                for s in chunk {
                    let (c, m) = self.sample_loss(s, inv_n, &mut g)?;
                    ce += c;
                    mse += m;
                }
                Ok((ce, mse, g))
            })
            .collect();
        let mut grads = zeros_like(&self.params);
        let (mut ce, mut mse) = (0.0, 0.0);
        for part in parts {
            let (c, m, g) = part?;
            ce += c;
            mse += m;
            add_into(&mut grads, &g);
        }
        let ce = ce * inv_n;
        let mse = mse * inv_n;
        let total = check_finite("policy loss", ce + 0.5 * mse)?;
        Ok((PolicyLosses { ce, mse, total }, grads))
    }

    pub fn imitation_update(&mut self, opt: &mut Adam, batch: &[PolicySample]) -> Result<PolicyLosses> {
        let (l, g) = self.imitation_loss(batch)?;
        opt.step(&mut self.params, &g)?;
        Ok(l)
    }
}

impl<E: Environment> Evaluator<E> for PolicyValueNet {
    fn evaluate(&self, env: &E, s: &E::State, g: &E::Goal, legal: &[usize]) -> Result<(Vec<f64>, f64)> {
        let f = self.forward(&env.policy_features(s, g), legal)?;
        Ok((f.logits, f.value))
    }
}
