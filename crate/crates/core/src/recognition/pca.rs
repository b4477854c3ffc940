use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::segment::GestureWindow;
use crate::{Error, Result};

/// PCA coefficients of one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Orthonormal basis, one component per entry.
    pub components: Vec<Vec<f64>>,
    /// Sample variance (n - 1 normalization) along each component, non-increasing.
    pub explained_variance: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Modified Gram-Schmidt (two passes); degenerate vectors are replaced by
/// the first standard basis vector that is independent of the set so far.
fn orthonormalize(vectors: &mut [Vec<f64>]) {
    let dim = vectors.first().map_or(0, Vec::len);
    let mut next_basis = 0;
    for i in 0..vectors.len() {
        loop {
            let original = l2(&vectors[i]);
            for _ in 0..2 {
                for j in 0..i {
                    let p = dot(&vectors[i], &vectors[j]);
                    let (head, tail) = vectors.split_at_mut(i);
                    tail[0].iter_mut().zip(&head[j]).for_each(|(v, u)| *v -= p * u);
                }
            }
            let n = l2(&vectors[i]);
            if n > 1e-6 * original.max(1e-300) && n > 1e-300 {
                vectors[i].iter_mut().for_each(|v| *v /= n);
                break;
            }
            let mut e = vec![0.0; dim];
            e[next_basis % dim] = 1.0;
            next_basis += 1;
            vectors[i] = e;
        }
    }
}

impl PcaModel {
    /// Fits `n_components` principal axes to row samples.
    pub fn fit(samples: &[Vec<f64>], n_components: usize) -> Result<Self> {
        let n = samples.len();
        if n_components == 0 {
            return Err(Error::Validation("n_components must be >= 1".into()));
        }
        if n < n_components + 1 {
            return Err(Error::Validation(format!(
                "PCA with {n_components} components needs at least {} samples, got {n}",
                n_components + 1
            )));
        }
        let dim = samples[0].len();
        if dim == 0 || samples.iter().any(|s| s.len() != dim) {
            return Err(Error::Shape("PCA samples must share a non-zero dimension".into()));
        }
        if n_components > dim {
            return Err(Error::Validation(format!(
                "n_components ({n_components}) exceeds feature dimension ({dim})"
            )));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation("PCA samples must be finite".into()));
        }
        let mut mean = vec![0.0; dim];
        for s in samples {
            mean.iter_mut().zip(s).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let centred = DMatrix::from_fn(n, dim, |i, j| samples[i][j] - mean[j]);
        let denom = (n - 1) as f64;

        // eigen-decompose whichever of X'X (dim²) and XX' (n²) is smaller
        let (mut components, variances): (Vec<Vec<f64>>, Vec<f64>) = if dim <= n {
            let cov = centred.transpose() * &centred / denom;
            let eig = SymmetricEigen::new(cov);
            let mut order: Vec<usize> = (0..dim).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            order[..n_components]
                .iter()
                .map(|&k| (eig.eigenvectors.column(k).iter().copied().collect(), eig.eigenvalues[k].max(0.0)))
                .unzip()
        } else {
            let gram = &centred * centred.transpose();
            let eig = SymmetricEigen::new(gram);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            order[..n_components]
                .iter()
                .map(|&k| {
                    let lambda = eig.eigenvalues[k].max(0.0);
                    let v = centred.transpose() * eig.eigenvectors.column(k);
                    (v.iter().copied().collect(), lambda / denom)
                })
                .unzip()
        };
        orthonormalize(&mut components);
        for c in &mut components {
            let lead = c.iter().cloned().fold(0.0, |m: f64, v| if v.abs() > m.abs() { v } else { m });
            if lead < 0.0 {
                c.iter_mut().for_each(|v| *v = -*v);
            }
        }
        Ok(Self {
            mean,
            components,
            explained_variance: variances,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn project(&self, x: &[f64]) -> Result<FeatureVector> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!(
                "expected a {}-dimensional input, got {}",
                self.dim(),
                x.len()
            )));
        }
        let centred: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok(FeatureVector {
            coefficients: self.components.iter().map(|c| dot(c, &centred)).collect(),
        })
    }

    /// `mean + Σ coefficient_i · component_i`.
    pub fn reconstruct(&self, features: &FeatureVector) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, a) in self.components.iter().zip(&features.coefficients) {
            out.iter_mut().zip(c).for_each(|(o, v)| *o += a * v);
        }
        out
    }
}

/// Fits PCA to the flattened slices of gesture windows.
pub fn pca_fit(windows: &[GestureWindow], n_components: usize) -> Result<PcaModel> {
    let samples: Vec<Vec<f64>> = windows.iter().map(|w| w.slice.clone()).collect();
    PcaModel::fit(&samples, n_components)
}

pub fn pca_project(model: &PcaModel, window: &GestureWindow) -> Result<FeatureVector> {
    model.project(&window.slice)
}
