//! Small dense networks with closed-form gradients: the policy/value net,
//! the contrastive reward model, their losses and an Adam optimizer.

mod policy;
mod ppo;
mod reward;

pub use policy::*;
pub use ppo::*;
pub use reward::*;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major tensor.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(dims: &[usize]) -> Tensor {
        Tensor { dims: dims.to_vec(), data: vec![0.0; dims.iter().product()] }
    }

    /// Uniform in `[-a, a]` with `a = sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot<R: Rng>(dims: &[usize], fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let n = dims.iter().product();
        Tensor { dims: dims.to_vec(), data: (0..n).map(|_| rng.random_range(-a..=a)).collect() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// An ordered list of parameter tensors; gradients share the same layout.
pub type Params = Vec<Tensor>;

pub fn zeros_like(p: &[Tensor]) -> Params {
    p.iter().map(|t| Tensor::zeros(&t.dims)).collect()
}

pub fn num_params(p: &[Tensor]) -> usize {
    p.iter().map(Tensor::len).sum()
}

/// Reads the parameter at a flat index across all tensors.
pub fn flat_get(p: &[Tensor], mut i: usize) -> f64 {
    for t in p {
        if i < t.len() {
            return t.data[i];
        }
        i -= t.len();
    }
    panic!("flat index out of range")
}

pub fn flat_set(p: &mut [Tensor], mut i: usize, v: f64) {
    for t in p {
        if i < t.len() {
            t.data[i] = v;
            return;
        }
        i -= t.len();
    }
    panic!("flat index out of range")
}

pub fn add_into(acc: &mut [Tensor], other: &[Tensor]) {
    for (a, b) in acc.iter_mut().zip(other) {
        for (x, y) in a.data.iter_mut().zip(&b.data) {
            *x += y;
        }
    }
}

pub fn scale(p: &mut [Tensor], s: f64) {
    for t in p {
        for x in &mut t.data {
            *x *= s;
        }
    }
}

pub fn all_finite(p: &[Tensor]) -> bool {
    p.iter().all(|t| t.data.iter().all(|x| x.is_finite()))
}

pub(crate) fn check_finite(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Params,
    pub v: Params,
}

impl Adam {
    pub fn new(params: &[Tensor], lr: f64) -> Adam {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: zeros_like(params), v: zeros_like(params) }
    }

    /// One bias-corrected update. Refuses non-finite gradients.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if !all_finite(grads) {
            return Err(Error::NonFinite("gradient".into()));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = self.beta1 * m.data[i] + (1.0 - self.beta1) * gi;
                v.data[i] = self.beta2 * v.data[i] + (1.0 - self.beta2) * gi * gi;
                let mh = m.data[i] / bc1;
                let vh = v.data[i] / bc2;
                p.data[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(x))` without overflow.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn log_softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

/// Dense layer stored input-major (`[in, out]`) so that sparse inputs only
/// touch the rows of their nonzero entries.
pub(crate) fn sparse_affine(w: &Tensor, b: &Tensor, x: &[f64]) -> Vec<f64> {
    let out = b.len();
    let mut y = b.data.clone();
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            let row = &w.data[i * out..(i + 1) * out];
            for (yj, wj) in y.iter_mut().zip(row) {
                *yj += xi * wj;
            }
        }
    }
    y
}

pub(crate) fn sparse_affine_backward(dw: &mut Tensor, db: &mut Tensor, x: &[f64], dy: &[f64]) {
    let out = dy.len();
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            let row = &mut dw.data[i * out..(i + 1) * out];
            for (g, d) in row.iter_mut().zip(dy) {
                *g += xi * d;
            }
        }
    }
    for (g, d) in db.data.iter_mut().zip(dy) {
        *g += d;
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Versioned checkpoint of a parameter set with its optimizer state.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct TensorDump {
    pub version: u32,
    pub step: u64,
    pub tensors: Params,
    pub optimizer: Option<Adam>,
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_zero_lr_is_noop() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut p = vec![Tensor::glorot(&[3, 4], 3, 4, &mut rng)];
        let before = p.clone();
        let g = vec![Tensor { dims: vec![3, 4], data: vec![0.5; 12] }];
        let mut opt = Adam::new(&p, 0.0);
        opt.step(&mut p, &g).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut p = vec![Tensor { dims: vec![2], data: vec![3.0, -2.0] }];
        let mut opt = Adam::new(&p, 0.05);
        for _ in 0..2000 {
            let g = vec![Tensor { dims: vec![2], data: p[0].data.iter().map(|x| 2.0 * x).collect() }];
            opt.step(&mut p, &g).unwrap();
        }
        assert!(p[0].data.iter().all(|x| x.abs() < 1e-3));
    }

    #[test]
    fn adam_rejects_nan() {
        let mut p = vec![Tensor::zeros(&[1])];
        let mut opt = Adam::new(&p, 0.1);
        assert!(opt.step(&mut p, &[Tensor { dims: vec![1], data: vec![f64::NAN] }]).is_err());
    }

    #[test]
    fn stable_scalar_functions() {
        assert!((log_sigmoid(0.0) + 2f64.ln()).abs() < 1e-15);
        assert!(log_sigmoid(-800.0).is_finite());
        assert!((softplus(-2.0) - (1.0 + (-2f64).exp()).ln()).abs() < 1e-15);
        assert!((sigmoid(800.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dump_roundtrip_bit_exact() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let t = vec![Tensor::glorot(&[7, 5], 7, 5, &mut rng)];
        let d = TensorDump { version: 1, step: 9, optimizer: Some(Adam::new(&t, 1e-3)), tensors: t };
        let back: TensorDump = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        for (a, b) in d.tensors[0].data.iter().zip(&back.tensors[0].data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
