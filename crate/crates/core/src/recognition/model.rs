use serde::{Deserialize, Serialize};

use super::knn::knn_classify;
use super::pca::{FeatureVector, PcaModel};
use super::segment::{segment_multi, GestureWindow, SegmentConfig};
use super::src::{src_classify, Dictionary, SrcResult};
use crate::channel::GestureLabel;
use crate::doppler::DopplerSpectrogram;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub n_components: usize,
    /// Maximum atoms in a sparse code.
    pub sparsity: usize,
    /// OMP stops once the residual norm drops below this.
    pub tol: f64,
    /// Columns with `|f| <= exclude_hz` are zeroed before feature extraction.
    pub exclude_hz: f64,
    pub segment: SegmentConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_components: 20,
            sparsity: 10,
            tol: 1e-6,
            exclude_hz: 1.0,
            segment: SegmentConfig::default(),
        }
    }
}

/// One recognised gesture in a longer recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub start_s: f64,
    pub end_s: f64,
    pub label: GestureLabel,
    pub residuals: Vec<f64>,
}

/// Trained PCA basis plus SRC dictionary (one atom per training window).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureModel {
    pub config: ModelConfig,
    pub rows: usize,
    pub cols: usize,
    pub pca: PcaModel,
    pub dictionary: Dictionary,
}

/// Flattened window after zero-band removal, amplitude compression and
/// unit normalization.
pub fn window_vector(window: &GestureWindow, exclude_hz: f64) -> Vec<f64> {
    let mut v: Vec<f64> = window
        .slice
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if window.column_hz(i % window.cols).abs() <= exclude_hz {
                0.0
            } else {
                p.max(0.0).sqrt()
            }
        })
        .collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

impl GestureModel {
    pub fn train(windows: &[GestureWindow], labels: &[GestureLabel], config: &ModelConfig) -> Result<Self> {
        if windows.len() != labels.len() {
            return Err(Error::Shape("one label per training window required".into()));
        }
        let Some(first) = windows.first() else {
            return Err(Error::Validation("no training windows".into()));
        };
        let (rows, cols) = (first.rows, first.cols);
        if windows.iter().any(|w| w.rows != rows || w.cols != cols) {
            return Err(Error::Shape("training windows must share a grid".into()));
        }
        let samples: Vec<Vec<f64>> = windows.iter().map(|w| window_vector(w, config.exclude_hz)).collect();
        let pca = PcaModel::fit(&samples, config.n_components)?;
        let features = samples
            .iter()
            .map(|s| pca.project(s).map(|f| f.coefficients))
            .collect::<Result<Vec<_>>>()?;
        let dictionary = Dictionary::from_features(features, labels.to_vec())?;
        if config.sparsity == 0 || config.sparsity > dictionary.n_atoms() {
            return Err(Error::Validation(format!(
                "sparsity must lie in 1..={}, got {}",
                dictionary.n_atoms(),
                config.sparsity
            )));
        }
        Ok(Self {
            config: config.clone(),
            rows,
            cols,
            pca,
            dictionary,
        })
    }

    pub fn features(&self, window: &GestureWindow) -> Result<FeatureVector> {
        if window.rows != self.rows || window.cols != self.cols {
            return Err(Error::Shape(format!(
                "window grid {}x{} does not match model grid {}x{}",
                window.rows, window.cols, self.rows, self.cols
            )));
        }
        self.pca.project(&window_vector(window, self.config.exclude_hz))
    }

    pub fn classify_window(&self, window: &GestureWindow) -> Result<SrcResult> {
        let y = self.features(window)?;
        src_classify(&y, &self.dictionary, self.config.sparsity, self.config.tol)
    }

    /// k-NN baseline over the same (unit-normalized) PCA features.
    pub fn classify_window_knn(&self, window: &GestureWindow, k: usize) -> Result<GestureLabel> {
        let y = self.features(window)?.coefficients;
        let n = y.iter().map(|x| x * x).sum::<f64>().sqrt();
        let y: Vec<f64> = if n > 0.0 { y.iter().map(|x| x / n).collect() } else { y };
        let training: Vec<(Vec<f64>, GestureLabel)> = (0..self.dictionary.n_atoms())
            .map(|i| (self.dictionary.atom(i).to_vec(), self.dictionary.label(i)))
            .collect();
        knn_classify(&y, &training, k)
    }

    /// Segments one spectrogram per receiver (in training order) and
    /// classifies every window found.
    pub fn classify_spectrograms(&self, specs: &[DopplerSpectrogram]) -> Result<Vec<Detection>> {
        let seg = &self.config.segment;
        if specs.len() * seg.rows != self.rows || seg.cols != self.cols {
            return Err(Error::Shape(format!(
                "model expects {} receiver(s) of {}x{} windows, got {} spectrogram(s)",
                self.rows / seg.rows.max(1),
                seg.rows,
                seg.cols,
                specs.len()
            )));
        }
        segment_multi(specs, seg)?
            .iter()
            .map(|w| {
                let r = self.classify_window(w)?;
                Ok(Detection {
                    start_s: w.start_s,
                    end_s: w.end_s,
                    label: r.label,
                    residuals: r.residuals,
                })
            })
            .collect()
    }
}
