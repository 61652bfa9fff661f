//! Generative-quality and task metrics: Fréchet distance, k-NN precision
//! and recall, validity and success rates, ranking AUC and report tables.

mod features;
mod report;

pub use features::*;
pub use report::*;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};

/// Feature vectors, one row per sample, tagged with their extractor.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct FeatureSet {
    pub extractor: String,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureSet {
    pub fn new(extractor: impl Into<String>, rows: Vec<Vec<f64>>) -> Result<FeatureSet> {
        if let Some(first) = rows.first() {
            let d = first.len();
            if let Some(bad) = rows.iter().find(|r| r.len() != d) {
                return Err(Error::Dimension { expected: d, got: bad.len() });
            }
        }
        Ok(FeatureSet { extractor: extractor.into(), rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.dim(), |i, j| self.rows[i][j])
    }
}

fn mean_cov(f: &FeatureSet) -> (DVector<f64>, DMatrix<f64>) {
    let x = f.matrix();
    let n = x.nrows() as f64;
    let mu = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n));
    let mut xc = x;
    for mut row in xc.row_iter_mut() {
        row -= mu.transpose();
    }
    let cov = xc.transpose() * &xc / (n - 1.0);
    (mu, cov)
}

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(m.clone());
    let s = e.eigenvalues.map(|l| l.max(0.0).sqrt());
    &e.eigenvectors * DMatrix::from_diagonal(&s) * e.eigenvectors.transpose()
}

/// Squared Fréchet distance between Gaussian fits of two feature sets.
pub fn frechet_distance(a: &FeatureSet, b: &FeatureSet) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientSamples(format!("need 2 samples per set, got {} and {}", a.len(), b.len())));
    }
    if a.dim() != b.dim() {
        return Err(Error::Dimension { expected: a.dim(), got: b.dim() });
    }
    let (mu_a, cov_a) = mean_cov(a);
    let (mu_b, cov_b) = mean_cov(b);
    let ra = sym_sqrt(&cov_a);
    let m = &ra * &cov_b * &ra;
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let tr_sqrt: f64 = eig.eigenvalues.iter().map(|&l| if l < 1e-10 { 0.0 } else { l.sqrt() }).sum();
    let d2 = (mu_a - mu_b).norm_squared() + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
    Ok(d2.max(0.0))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Distance from each real sample to its k-th nearest other real sample.
pub fn knn_radii(real: &FeatureSet, k: usize) -> Result<Vec<f64>> {
    if k == 0 || real.len() < k + 1 {
        return Err(Error::InsufficientSamples(format!("k = {k} needs at least {} samples, got {}", k + 1, real.len())));
    }
    Ok((0..real.len())
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> = (0..real.len()).filter(|&j| j != i).map(|j| dist(&real.rows[i], &real.rows[j])).collect();
            d.sort_by(f64::total_cmp);
            d[k - 1]
        })
        .collect())
}

/// k-NN precision and recall. Both use the real samples' radii: a generated
/// sample is precise if it lies within some real sample's radius, and a real
/// sample is recalled if some generated sample lies within its radius.
pub fn precision_recall(real: &FeatureSet, gen: &FeatureSet, k: usize) -> Result<(f64, f64)> {
    if gen.is_empty() {
        return Err(Error::InsufficientSamples("no generated samples".into()));
    }
    if real.dim() != gen.dim() {
        return Err(Error::Dimension { expected: real.dim(), got: gen.dim() });
    }
    let radii = knn_radii(real, k)?;
    let within = |g: &[f64], i: usize| dist(g, &real.rows[i]) <= radii[i];
    let precise = gen.rows.par_iter().filter(|g| (0..real.len()).any(|i| within(g, i))).count();
    let recalled = (0..real.len()).into_par_iter().filter(|&i| gen.rows.iter().any(|g| within(g, i))).count();
    Ok((precise as f64 / gen.len() as f64, recalled as f64 / real.len() as f64))
}

pub fn validity_rate<E: Environment>(env: &E, states: &[E::State]) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(states.iter().filter(|s| env.is_valid(s)).count() as f64 / states.len() as f64)
}

pub fn success_rate<E: Environment>(env: &E, states: &[E::State], goals: &[E::Goal]) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if states.len() != goals.len() {
        return Err(Error::Dimension { expected: states.len(), got: goals.len() });
    }
    Ok(states.iter().zip(goals).filter(|(s, g)| env.is_success(s, g)).count() as f64 / states.len() as f64)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::InsufficientSamples("auc needs both classes".into()));
    }
    if pos.iter().chain(neg).any(|x| x.is_nan()) {
        return Err(Error::NonFinite("auc score".into()));
    }
    let mut neg = neg.to_vec();
    neg.sort_by(f64::total_cmp);
    let mut wins = 0.0;
    for &p in pos {
        let below = neg.partition_point(|&n| n < p);
        let upto = neg.partition_point(|&n| n <= p);
        wins += below as f64 + 0.5 * (upto - below) as f64;
    }
    Ok(wins / (pos.len() * neg.len()) as f64)
}
