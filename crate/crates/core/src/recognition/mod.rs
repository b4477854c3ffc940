//! Gesture recognition from Doppler-time spectrograms.
//!
//! Gesture windows are cut from a spectrogram by thresholding off-zero
//! Doppler energy, resampled to a fixed grid, projected onto a PCA basis
//! and classified with a sparse representation classifier whose sparse
//! code is found by orthogonal matching pursuit. A k-NN classifier is kept
//! as a baseline.

mod features;
mod knn;
mod model;
mod pca;
mod segment;
mod src;

pub use features::{centroid_curve, curve_features, CurveFeatures};
pub use knn::knn_classify;
pub use model::{window_vector, Detection, GestureModel, ModelConfig};
pub use pca::{pca_fit, pca_project, FeatureVector, PcaModel};
pub use segment::{
    active_runs, combine_spectrograms, recording_window, resample_bilinear, segment, segment_multi, stack_windows,
    window_from_batches, GestureWindow, SegmentConfig, WINDOW_COLS, WINDOW_ROWS,
};
pub use src::{class_residuals, omp, src_classify, Dictionary, SparseCode, SrcResult};

pub use crate::channel::GestureLabel;
