use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::pca::FeatureVector;
use crate::channel::GestureLabel;
use crate::{Error, Result};

/// Labelled, unit-norm dictionary atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    atoms: Vec<Vec<f64>>,
    labels: Vec<GestureLabel>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl Dictionary {
    /// Builds a dictionary from raw feature columns, normalizing each to unit length.
    pub fn from_features(features: Vec<Vec<f64>>, labels: Vec<GestureLabel>) -> Result<Self> {
        let atoms = features
            .into_iter()
            .map(|f| {
                let n = l2(&f);
                if !(n > 0.0 && n.is_finite()) {
                    return Err(Error::Validation("dictionary atom has zero or non-finite norm".into()));
                }
                Ok(f.into_iter().map(|v| v / n).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Self::new(atoms, labels)
    }

    /// Wraps atoms that are already unit-norm.
    pub fn new(atoms: Vec<Vec<f64>>, labels: Vec<GestureLabel>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Validation("dictionary must contain at least one atom".into()));
        }
        if atoms.len() != labels.len() {
            return Err(Error::Shape("one label per atom required".into()));
        }
        let dim = atoms[0].len();
        if atoms.iter().any(|a| a.len() != dim) {
            return Err(Error::Shape("dictionary atoms must share a dimension".into()));
        }
        if atoms.iter().any(|a| (l2(a) - 1.0).abs() > 1e-9) {
            return Err(Error::Validation("dictionary atoms must have unit norm".into()));
        }
        Ok(Self { atoms, labels })
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn n_features(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i]
    }

    pub fn label(&self, i: usize) -> GestureLabel {
        self.labels[i]
    }

    pub fn labels(&self) -> &[GestureLabel] {
        &self.labels
    }

    /// Classes with at least one atom, in label order.
    pub fn classes(&self) -> Vec<GestureLabel> {
        let mut c = self.labels.clone();
        c.sort();
        c.dedup();
        c
    }

    /// `Σ coefficients[i] · atom(support[i])`.
    pub fn synthesize(&self, support: &[usize], coefficients: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features()];
        for (&i, &c) in support.iter().zip(coefficients) {
            out.iter_mut().zip(&self.atoms[i]).for_each(|(o, a)| *o += c * a);
        }
        out
    }

    /// Least-squares coefficients of `y` on the atoms in `support`.
    pub fn least_squares(&self, y: &[f64], support: &[usize]) -> Result<Vec<f64>> {
        let d = DMatrix::from_fn(self.n_features(), support.len(), |r, c| self.atoms[support[c]][r]);
        let b = DVector::from_column_slice(y);
        let x = d
            .svd(true, true)
            .solve(&b, 1e-12)
            .map_err(|e| Error::Numerical(format!("least squares failed: {e}")))?;
        Ok(x.iter().copied().collect())
    }
}

/// Sparse code found by orthogonal matching pursuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseCode {
    /// Selected atoms in selection order.
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
    /// Residual norm before the first step and after each step.
    pub residual_norms: Vec<f64>,
}

impl SparseCode {
    /// Full-length coefficient vector over all atoms.
    pub fn dense(&self, n_atoms: usize) -> Vec<f64> {
        let mut x = vec![0.0; n_atoms];
        for (&i, &c) in self.support.iter().zip(&self.coefficients) {
            x[i] = c;
        }
        x
    }
}

/// Orthogonal matching pursuit: greedy atom selection by largest absolute
/// correlation with the residual, least-squares refit over the support
/// after every step. Stops after `sparsity` atoms or when the residual
/// norm drops below `tol`.
pub fn omp(y: &[f64], dict: &Dictionary, sparsity: usize, tol: f64) -> Result<SparseCode> {
    if y.len() != dict.n_features() {
        return Err(Error::Shape(format!(
            "feature length {} does not match dictionary dimension {}",
            y.len(),
            dict.n_features()
        )));
    }
    if sparsity == 0 || sparsity > dict.n_atoms() {
        return Err(Error::Validation(format!(
            "sparsity must lie in 1..={}, got {sparsity}",
            dict.n_atoms()
        )));
    }
    let mut support: Vec<usize> = Vec::with_capacity(sparsity);
    let mut coefficients = Vec::new();
    let mut residual = y.to_vec();
    let mut residual_norms = vec![l2(&residual)];
    while support.len() < sparsity && *residual_norms.last().unwrap() >= tol {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..dict.n_atoms() {
            if support.contains(&i) {
                continue;
            }
            let c = dot(dict.atom(i), &residual).abs();
            if best.map_or(true, |(_, b)| c > b) {
                best = Some((i, c));
            }
        }
        let Some((pick, corr)) = best else { break };
        if corr <= 1e-14 * residual_norms[0].max(1e-300) {
            break;
        }
        support.push(pick);
        coefficients = dict.least_squares(y, &support)?;
        let approx = dict.synthesize(&support, &coefficients);
        residual = y.iter().zip(&approx).map(|(a, b)| a - b).collect();
        residual_norms.push(l2(&residual));
    }
    Ok(SparseCode {
        support,
        coefficients,
        residual_norms,
    })
}

/// `‖y − D δ_c(x)‖` for every gesture class (index = label index).
///
/// A class without atoms in the code keeps the full `‖y‖`.
pub fn class_residuals(y: &[f64], dict: &Dictionary, code: &SparseCode) -> Vec<f64> {
    GestureLabel::ALL
        .iter()
        .map(|&class| {
            let (sup, coef): (Vec<usize>, Vec<f64>) = code
                .support
                .iter()
                .zip(&code.coefficients)
                .filter(|(i, _)| dict.label(**i) == class)
                .map(|(i, c)| (*i, *c))
                .unzip();
            let approx = dict.synthesize(&sup, &coef);
            l2(&y.iter().zip(&approx).map(|(a, b)| a - b).collect::<Vec<_>>())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrcResult {
    pub label: GestureLabel,
    /// Per-class residual norms indexed by label index (`g1` first).
    pub residuals: Vec<f64>,
    /// Set when the query had zero norm and the nearest atom decided the label.
    pub degenerate: bool,
    pub code: SparseCode,
}

/// Sparse representation classification of `y` over `dict`.
///
/// The label is the represented class with the smallest class-restricted
/// residual; ties go to the lower class index.
pub fn src_classify(y: &FeatureVector, dict: &Dictionary, sparsity: usize, tol: f64) -> Result<SrcResult> {
    let y = &y.coefficients;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("feature vector must be finite".into()));
    }
    if l2(y) == 0.0 {
        if y.len() != dict.n_features() {
            return Err(Error::Shape("feature length does not match dictionary".into()));
        }
        let mut nearest = 0;
        let mut best = f64::INFINITY;
        for i in 0..dict.n_atoms() {
            let d: f64 = dict.atom(i).iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
            if d < best - 1e-12 {
                best = d;
                nearest = i;
            }
        }
        return Ok(SrcResult {
            label: dict.label(nearest),
            residuals: vec![0.0; GestureLabel::ALL.len()],
            degenerate: true,
            code: SparseCode {
                support: vec![],
                coefficients: vec![],
                residual_norms: vec![0.0],
            },
        });
    }
    let code = omp(y, dict, sparsity, tol)?;
    let residuals = class_residuals(y, dict, &code);
    let label = dict
        .classes()
        .into_iter()
        .fold(None, |best: Option<GestureLabel>, c| match best {
            Some(b) if residuals[b.index()] <= residuals[c.index()] => Some(b),
            _ => Some(c),
        })
        .expect("dictionary is non-empty");
    Ok(SrcResult {
        label,
        residuals,
        degenerate: false,
        code,
    })
}
