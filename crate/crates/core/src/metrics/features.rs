use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::FeatureSet;
use crate::error::{Error, Result};
use crate::raster::Raster;

pub const RASTER_PCA: &str = "raster-pca";
pub const PCA_DIM: usize = 64;

/// Principal components of flattened rasters fitted on a reference set.
/// Components beyond the data's rank are zero, so the output dimension is
/// always the requested one.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct RasterPca {
    pub mean: Vec<f64>,
    /// `dim` unit vectors, each of the input length.
    pub components: Vec<Vec<f64>>,
}

impl RasterPca {
    pub fn fit(reference: &[Raster], dim: usize) -> Result<RasterPca> {
        let rows: Vec<Vec<f64>> = reference.iter().map(Raster::to_f64).collect();
        Self::fit_rows(&rows, dim)
    }

    pub fn fit_rows(rows: &[Vec<f64>], dim: usize) -> Result<RasterPca> {
        if rows.len() < 2 {
            return Err(Error::InsufficientSamples("pca needs two reference samples".into()));
        }
        let d = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::Dimension { expected: d, got: bad.len() });
        }
        let n = rows.len();
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
        let x = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
        // Eigenvectors of the smaller Gram matrix give the same components.
        let mut comps: Vec<(f64, Vec<f64>)> = if n <= d {
            let e = SymmetricEigen::new(&x * x.transpose());
            (0..n)
                .filter(|&i| e.eigenvalues[i] > 1e-9)
                .map(|i| {
                    let v = x.transpose() * e.eigenvectors.column(i);
                    let norm = v.norm();
                    (e.eigenvalues[i], v.iter().map(|c| c / norm).collect())
                })
                .collect()
        } else {
            let e = SymmetricEigen::new(x.transpose() * &x);
            (0..d)
                .filter(|&i| e.eigenvalues[i] > 1e-9)
                .map(|i| (e.eigenvalues[i], e.eigenvectors.column(i).iter().copied().collect()))
                .collect()
        };
        comps.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut components: Vec<Vec<f64>> = comps.into_iter().take(dim).map(|(_, v)| canonical_sign(v)).collect();
        components.resize(dim, vec![0.0; d]);
        Ok(RasterPca { mean, components })
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(x).zip(&self.mean).map(|((ci, xi), mi)| ci * (xi - mi)).sum())
            .collect()
    }

    pub fn features(&self, rasters: &[Raster]) -> Result<FeatureSet> {
        let d = self.mean.len();
        if let Some(bad) = rasters.iter().find(|r| r.cells.len() != d) {
            return Err(Error::Dimension { expected: d, got: bad.cells.len() });
        }
        FeatureSet::new(RASTER_PCA, rasters.iter().map(|r| self.project(&r.to_f64())).collect())
    }
}

/// Flips a vector so its largest-magnitude coordinate is positive.
fn canonical_sign(v: Vec<f64>) -> Vec<f64> {
    let pivot = v.iter().copied().fold(0.0f64, |m, c| if c.abs() > m.abs() { c } else { m });
    if pivot < 0.0 {
        v.into_iter().map(|c| -c).collect()
    } else {
        v
    }
}

/// Content hash of a raster set.
pub fn rasters_hash(rasters: &[Raster]) -> String {
    let mut h = Sha256::new();
    for r in rasters {
        h.update((r.res as u64).to_le_bytes());
        h.update(r.cells.iter().map(|&c| c as u8).collect::<Vec<u8>>());
    }
    hex::encode(h.finalize())
}

/// Feature sets stored as JSON under `dir`, keyed by extractor id and a
/// dataset hash.
#[derive(Clone, Debug)]
pub struct FeatureCache {
    pub dir: PathBuf,
}

impl FeatureCache {
    pub fn new(dir: &Path) -> Result<FeatureCache> {
        std::fs::create_dir_all(dir)?;
        Ok(FeatureCache { dir: dir.to_path_buf() })
    }

    pub fn path(&self, extractor: &str, dataset_hash: &str) -> PathBuf {
        self.dir.join(format!("{extractor}-{dataset_hash}.json"))
    }

    pub fn get_or_compute<F>(&self, extractor: &str, dataset_hash: &str, compute: F) -> Result<FeatureSet>
    where
        F: FnOnce() -> Result<FeatureSet>,
    {
        let path = self.path(extractor, dataset_hash);
        if path.exists() {
            let f: FeatureSet = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
            if f.extractor == extractor {
                return Ok(f);
            }
        }
        let f = compute()?;
        std::fs::write(&path, serde_json::to_string(&f)?)?;
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn rasters(n: usize, seed: u64) -> Vec<Raster> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut r = Raster::empty(8);
                for c in r.cells.iter_mut() {
                    *c = rng.random_bool(0.3);
                }
                r
            })
            .collect()
    }

    #[test]
    fn pca_has_requested_dimension_and_orthonormal_components() {
        let refs = rasters(20, 0);
        let pca = RasterPca::fit(&refs, PCA_DIM).unwrap();
        assert_eq!(pca.components.len(), PCA_DIM);
        let nonzero: Vec<_> = pca.components.iter().filter(|c| c.iter().any(|x| *x != 0.0)).collect();
        assert!(nonzero.len() <= 19);
        for (i, a) in nonzero.iter().enumerate() {
            for (j, b) in nonzero.iter().enumerate() {
                let d: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
                assert!((d - (i == j) as u8 as f64).abs() < 1e-8);
            }
        }
        assert_eq!(pca.features(&refs).unwrap().dim(), PCA_DIM);
    }

    #[test]
    fn pca_projection_preserves_reference_geometry() {
        let refs = rasters(12, 1);
        let pca = RasterPca::fit(&refs, PCA_DIM).unwrap();
        let f = pca.features(&refs).unwrap();
        let raw: Vec<Vec<f64>> = refs.iter().map(Raster::to_f64).collect();
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        assert!((d(&raw[0], &raw[5]) - d(&f.rows[0], &f.rows[5])).abs() < 1e-8);
    }

    #[test]
    fn pca_is_deterministic() {
        let refs = rasters(15, 2);
        assert_eq!(RasterPca::fit(&refs, 8).unwrap(), RasterPca::fit(&refs, 8).unwrap());
    }

    #[test]
    fn cache_reuses_stored_features() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FeatureCache::new(dir.path()).unwrap();
        let refs = rasters(5, 3);
        let h = rasters_hash(&refs);
        let a = cache.get_or_compute(RASTER_PCA, &h, || FeatureSet::new(RASTER_PCA, vec![vec![1.0, 2.0]])).unwrap();
        let b = cache.get_or_compute(RASTER_PCA, &h, || panic!("should hit the cache")).unwrap();
        assert_eq!(a, b);
    }
}
