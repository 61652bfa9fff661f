use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{add_into, check_finite, log_softmax, zeros_like, Adam, Params, PolicyValueNet};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpoConfig {
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig { clip: 0.2, value_coef: 0.5, entropy_coef: 0.01 }
    }
}

/// One on-policy decision with the behaviour log-probability.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PpoSample {
    pub features: Vec<f64>,
    pub legal: Vec<usize>,
    /// Position of the taken action in `legal`.
    pub taken: usize,
    pub old_logp: f64,
    /// `ret - value` at collection time, held fixed during the update.
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoLosses {
    pub surrogate: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
}

/// Clipped surrogate plus value regression minus an entropy bonus, averaged
/// over the batch, with its gradient.
pub fn ppo_loss(net: &PolicyValueNet, batch: &[PpoSample], cfg: &PpoConfig) -> Result<(PpoLosses, Params)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let inv_n = 1.0 / batch.len() as f64;
    let parts: Vec<Result<(PpoLosses, Params)>> = batch
        .par_chunks(32)
        .map(|chunk| {
            let mut g = zeros_like(&net.params);
            let mut acc = PpoLosses::default();
            for s in chunk {
                if s.taken >= s.legal.len() {
                    return Err(Error::InvalidAction(format!("taken index {} of {}", s.taken, s.legal.len())));
                }
                let f = net.forward(&s.features, &s.legal)?;
                let lp = log_softmax(&f.logits);
                let p: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
                let ratio = (lp[s.taken] - s.old_logp).exp();
                let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
                let (u, c) = (ratio * s.advantage, clipped * s.advantage);
                let surrogate = u.min(c);
                let entropy: f64 = -p.iter().zip(&lp).map(|(pi, li)| pi * li).sum::<f64>();
                let verr = f.value - s.ret;
                acc.surrogate += surrogate;
                acc.value += verr * verr;
                acc.entropy += entropy;

                let mut dl = vec![0.0; p.len()];
                if u <= c {
                    for (k, d) in dl.iter_mut().enumerate() {
                        let delta = (k == s.taken) as u8 as f64;
                        *d -= inv_n * s.advantage * ratio * (delta - p[k]);
                    }
                }
                for (k, d) in dl.iter_mut().enumerate() {
                    *d += inv_n * cfg.entropy_coef * p[k] * (lp[k] + entropy);
                }
                let dv = inv_n * 2.0 * cfg.value_coef * verr;
                net.backward(&s.features, &s.legal, &f, &dl, dv, &mut g);
            }
            Ok((acc, g))
        })
        .collect();
    let mut grads = zeros_like(&net.params);
    let mut l = PpoLosses::default();
    for part in parts {
        let (a, g) = part?;
        l.surrogate += a.surrogate;
        l.value += a.value;
        l.entropy += a.entropy;
        add_into(&mut grads, &g);
    }
    l.surrogate *= inv_n;
    l.value *= inv_n;
    l.entropy *= inv_n;
    l.total = check_finite("ppo loss", -l.surrogate + cfg.value_coef * l.value - cfg.entropy_coef * l.entropy)?;
    Ok((l, grads))
}

pub fn ppo_update(net: &mut PolicyValueNet, opt: &mut Adam, batch: &[PpoSample], cfg: &PpoConfig) -> Result<PpoLosses> {
    let (l, g) = ppo_loss(net, batch, cfg)?;
    opt.step(&mut net.params, &g)?;
    Ok(l)
}
