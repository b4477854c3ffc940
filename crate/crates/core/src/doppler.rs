//! Doppler-time spectrograms.
//!
//! The main path is batched cross-ambiguity processing of a reference /
//! surveillance pair: within each batch the conjugate product of the two
//! channels is correlated against a grid of Doppler tones. An STFT over a
//! CSI time series is provided as the COTS-style baseline; it keeps the
//! stationary (0 Hz) component unless mean subtraction is requested.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::waveform::{CsiMatrix, IqTrace};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CafConfig {
    pub batch_len_s: f64,
    pub batch_hop_s: f64,
    pub max_doppler_hz: f64,
    /// Doppler grid spacing; `None` uses the native resolution `1 / batch_len_s`.
    pub doppler_step_hz: Option<f64>,
    /// Number of delay hypotheses (0, 1, .. samples); 1 is the zero-delay cut.
    pub delay_bins: usize,
}

impl Default for CafConfig {
    fn default() -> Self {
        Self {
            batch_len_s: 0.5,
            batch_hop_s: 0.25,
            max_doppler_hz: 60.0,
            doppler_step_hz: None,
            delay_bins: 1,
        }
    }
}

impl CafConfig {
    pub fn doppler_step(&self) -> f64 {
        self.doppler_step_hz.unwrap_or(1.0 / self.batch_len_s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.batch_len_s > 0.0 && self.batch_hop_s > 0.0) {
            return Err(Error::Config("batch length and hop must be > 0".into()));
        }
        if self.batch_hop_s > self.batch_len_s {
            return Err(Error::Config(format!(
                "batch_hop_s ({}) must not exceed batch_len_s ({})",
                self.batch_hop_s, self.batch_len_s
            )));
        }
        let step = self.doppler_step();
        if !(self.max_doppler_hz > 0.0 && step > 0.0 && step <= 2.0 * self.max_doppler_hz) {
            return Err(Error::Config(format!(
                "doppler step {step} Hz must lie in (0, 2 * max_doppler_hz]"
            )));
        }
        if self.delay_bins == 0 {
            return Err(Error::Config("delay_bins must be >= 1".into()));
        }
        Ok(())
    }

    /// Symmetric Doppler axis `k * step` covering `[-max, +max]`.
    pub fn doppler_axis(&self) -> Vec<f64> {
        symmetric_axis(self.doppler_step(), self.max_doppler_hz)
    }
}

fn symmetric_axis(step: f64, max: f64) -> Vec<f64> {
    let n = (max / step - 1e-9).ceil() as i64;
    (-n..=n).map(|k| k as f64 * step).collect()
}

/// Time × Doppler grid of linear power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DopplerSpectrogram {
    /// `magnitudes[batch][doppler_bin]`.
    pub magnitudes: Vec<Vec<f64>>,
    pub batch_times_s: Vec<f64>,
    pub doppler_axis_hz: Vec<f64>,
    pub resolution_hz: f64,
}

impl DopplerSpectrogram {
    pub fn new(magnitudes: Vec<Vec<f64>>, batch_times_s: Vec<f64>, doppler_axis_hz: Vec<f64>, resolution_hz: f64) -> Result<Self> {
        if magnitudes.len() != batch_times_s.len() {
            return Err(Error::Shape("one batch time per spectrogram row required".into()));
        }
        if magnitudes.iter().any(|row| row.len() != doppler_axis_hz.len()) {
            return Err(Error::Shape("every row must match the Doppler axis length".into()));
        }
        if magnitudes.iter().flatten().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::Validation("spectrogram magnitudes must be finite and >= 0".into()));
        }
        Ok(Self {
            magnitudes,
            batch_times_s,
            doppler_axis_hz,
            resolution_hz,
        })
    }

    pub fn n_batches(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn n_bins(&self) -> usize {
        self.doppler_axis_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitudes.is_empty() || self.doppler_axis_hz.is_empty()
    }

    pub fn max_doppler_hz(&self) -> f64 {
        self.doppler_axis_hz.iter().fold(0.0, |m, f| m.max(f.abs()))
    }

    /// Batch spacing in seconds (0 for a single batch).
    pub fn hop_s(&self) -> f64 {
        match self.batch_times_s.as_slice() {
            [a, b, ..] => b - a,
            _ => 0.0,
        }
    }

    /// Doppler frequency of the strongest bin per batch; ties go to the lower bin.
    pub fn peak_doppler(&self) -> Vec<f64> {
        self.magnitudes
            .iter()
            .map(|row| {
                let mut best = 0;
                for (i, v) in row.iter().enumerate() {
                    if *v > row[best] {
                        best = i;
                    }
                }
                self.doppler_axis_hz[best]
            })
            .collect()
    }

    /// Per-batch energy in bins with `|f| > exclude_hz`.
    pub fn off_zero_energy(&self, exclude_hz: f64) -> Vec<f64> {
        self.magnitudes
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&self.doppler_axis_hz)
                    .filter(|(_, f)| f.abs() > exclude_hz)
                    .map(|(m, _)| m)
                    .sum()
            })
            .collect()
    }
}

/// Number of batches of `batch` samples advancing by `hop` over `len` samples.
pub fn batch_count(len: usize, batch: usize, hop: usize) -> usize {
    if batch == 0 || hop == 0 || len < batch {
        0
    } else {
        (len - batch) / hop + 1
    }
}

const REANCHOR: usize = 512;

/// `|Σ_n x[n] e^{-j2π f n / fs}|²` for each `f` in `freqs`.
///
/// The twiddle is advanced by complex multiplication and re-anchored with an
/// exact evaluation every few hundred samples.
pub fn tone_powers(x: &[C64], fs: f64, freqs: &[f64]) -> Vec<f64> {
    freqs
        .iter()
        .map(|&f| {
            let w = -2.0 * PI * f / fs;
            let step = C64::from_polar(1.0, w);
            let mut acc = C64::new(0.0, 0.0);
            for (c, chunk) in x.chunks(REANCHOR).enumerate() {
                let mut tw = C64::from_polar(1.0, w * (c * REANCHOR) as f64);
                for v in chunk {
                    acc += v * tw;
                    tw *= step;
                }
            }
            acc.norm_sqr()
        })
        .collect()
}

/// Batched cross-ambiguity Doppler spectrogram of `surv` against `reference`.
///
/// For each batch and Doppler hypothesis `f` the cell holds
/// `|Σ_t ref*(t) surv(t + τ) e^{-j2πft}|²`, maximised over the configured
/// delay hypotheses `τ`.
pub fn caf_batch(reference: &IqTrace, surv: &IqTrace, config: &CafConfig) -> Result<DopplerSpectrogram> {
    config.validate()?;
    let fs = reference.sample_rate_hz;
    if (surv.sample_rate_hz - fs).abs() > 1e-9 * fs {
        return Err(Error::Shape(format!(
            "sample rates differ: reference {} Hz, surveillance {} Hz",
            fs, surv.sample_rate_hz
        )));
    }
    if reference.len() != surv.len() {
        return Err(Error::Shape(format!(
            "channel lengths differ: {} vs {}",
            reference.len(),
            surv.len()
        )));
    }
    let batch = (config.batch_len_s * fs).round() as usize;
    let hop = (config.batch_hop_s * fs).round().max(1.0) as usize;
    if batch == 0 || batch > reference.len() {
        return Err(Error::Range(format!(
            "batch of {} s exceeds signal duration {} s",
            config.batch_len_s,
            reference.duration_s()
        )));
    }
    let n_batches = batch_count(reference.len(), batch, hop);
    let axis = config.doppler_axis();
    let n = reference.len();

    let magnitudes: Vec<Vec<f64>> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let start = b * hop;
            let mut best = vec![0.0f64; axis.len()];
            for delay in 0..config.delay_bins {
                let product: Vec<C64> = (start..start + batch)
                    .map(|i| {
                        let s = if i + delay < n { surv.samples[i + delay] } else { C64::new(0.0, 0.0) };
                        reference.samples[i].conj() * s
                    })
                    .collect();
                for (m, p) in best.iter_mut().zip(tone_powers(&product, fs, &axis)) {
                    *m = f64::max(*m, p);
                }
            }
            best
        })
        .collect();

    let batch_times_s = (0..n_batches)
        .map(|b| reference.t0_s + (b * hop) as f64 / fs + batch as f64 / (2.0 * fs))
        .collect();
    DopplerSpectrogram::new(magnitudes, batch_times_s, axis, fs / batch as f64)
}

/// Uniformly sampled sequence of CSI snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiSeries {
    pub times_s: Vec<f64>,
    pub frames: Vec<CsiMatrix>,
}

impl CsiSeries {
    pub fn new(times_s: Vec<f64>, frames: Vec<CsiMatrix>) -> Result<Self> {
        if times_s.len() != frames.len() || frames.len() < 2 {
            return Err(Error::Shape("CSI series needs >= 2 frames with one time each".into()));
        }
        let (a, g) = (frames[0].n_rx(), frames[0].n_groups());
        if frames.iter().any(|f| f.n_rx() != a || f.n_groups() != g) {
            return Err(Error::Shape("all CSI frames must share dimensions".into()));
        }
        Ok(Self { times_s, frames })
    }

    /// Sampling interval, or a validation error when sampling is not uniform.
    pub fn sample_interval(&self) -> Result<f64> {
        let t = &self.times_s;
        let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
        if !(dt > 0.0) || t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
            return Err(Error::Validation("CSI series is not uniformly sampled".into()));
        }
        Ok(dt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftConfig {
    pub window_s: f64,
    pub hop_s: f64,
    /// Receive antenna to analyse; `None` averages over all antennas.
    pub antenna: Option<usize>,
    /// Subcarrier group to analyse; `None` averages over all groups.
    pub group: Option<usize>,
    pub hann: bool,
    /// Remove each window's mean (the stationary component) before the DFT.
    pub subtract_mean: bool,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_s: 1.0,
            hop_s: 0.5,
            antenna: None,
            group: None,
            hann: false,
            subtract_mean: false,
        }
    }
}

/// Short-time Fourier spectrogram of a CSI time series, averaged over the selected streams.
pub fn stft_csi(series: &CsiSeries, config: &StftConfig) -> Result<DopplerSpectrogram> {
    let dt = series.sample_interval()?;
    if !(config.window_s > 0.0 && config.hop_s > 0.0) {
        return Err(Error::Config("window and hop must be > 0".into()));
    }
    let win = (config.window_s / dt).round() as usize;
    let hop = ((config.hop_s / dt).round() as usize).max(1);
    let n = series.frames.len();
    if win < 2 || win > n {
        return Err(Error::Range(format!("window of {win} samples does not fit {n} frames")));
    }
    let first = &series.frames[0];
    let antennas: Vec<usize> = match config.antenna {
        Some(a) if a < first.n_rx() => vec![a],
        Some(a) => return Err(Error::Range(format!("antenna {a} out of range"))),
        None => (0..first.n_rx()).collect(),
    };
    let groups: Vec<usize> = match config.group {
        Some(g) if g < first.n_groups() => vec![g],
        Some(g) => return Err(Error::Range(format!("group {g} out of range"))),
        None => (0..first.n_groups()).collect(),
    };

    let fs = 1.0 / dt;
    let half = ((win - 1) / 2) as i64;
    let axis: Vec<f64> = (-half..=half).map(|k| k as f64 * fs / win as f64).collect();
    let taper: Vec<f64> = (0..win)
        .map(|i| {
            if config.hann {
                0.5 - 0.5 * (2.0 * PI * i as f64 / win as f64).cos()
            } else {
                1.0
            }
        })
        .collect();
    let streams: Vec<(usize, usize)> = antennas
        .iter()
        .flat_map(|&a| groups.iter().map(move |&g| (a, g)))
        .collect();

    let n_batches = batch_count(n, win, hop);
    let magnitudes = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let start = b * hop;
            let mut acc = vec![0.0; axis.len()];
            for &(a, g) in &streams {
                let mut x: Vec<C64> = series.frames[start..start + win].iter().map(|f| f.get(a, g)).collect();
                if config.subtract_mean {
                    let mean = x.iter().sum::<C64>() / win as f64;
                    x.iter_mut().for_each(|v| *v -= mean);
                }
                x.iter_mut().zip(&taper).for_each(|(v, w)| *v *= *w);
                for (m, p) in acc.iter_mut().zip(tone_powers(&x, fs, &axis)) {
                    *m += p;
                }
            }
            acc.iter().map(|m| m / streams.len() as f64).collect()
        })
        .collect();
    let times = (0..n_batches)
        .map(|b| series.times_s[b * hop] + (win as f64) * dt / 2.0)
        .collect();
    DopplerSpectrogram::new(magnitudes, times, axis, fs / win as f64)
}

/// How [`doppler_envelope`] scales batch energies into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeNorm {
    /// Divide by a fixed constant and clamp; comparable across runs.
    Fixed(f64),
    /// Divide by the largest batch energy of this trace.
    TraceMax,
}

/// Per-batch activity intensity: off-zero-Doppler energy, normalized.
pub fn doppler_envelope(spec: &DopplerSpectrogram, exclude_hz: f64, norm: EnvelopeNorm) -> Result<Vec<(f64, f64)>> {
    if !(exclude_hz >= 0.0) {
        return Err(Error::Validation("exclusion half-width must be >= 0".into()));
    }
    if exclude_hz >= spec.max_doppler_hz() {
        return Err(Error::Validation(format!(
            "exclusion half-width {exclude_hz} Hz leaves no Doppler bins (max {} Hz)",
            spec.max_doppler_hz()
        )));
    }
    let energy = spec.off_zero_energy(exclude_hz);
    let scale = match norm {
        EnvelopeNorm::Fixed(v) if v > 0.0 && v.is_finite() => v,
        EnvelopeNorm::Fixed(v) => return Err(Error::Validation(format!("normalizer must be > 0, got {v}"))),
        EnvelopeNorm::TraceMax => energy.iter().cloned().fold(0.0, f64::max),
    };
    Ok(spec
        .batch_times_s
        .iter()
        .zip(energy)
        .map(|(t, e)| (*t, if scale > 0.0 { (e / scale).clamp(0.0, 1.0) } else { 0.0 }))
        .collect())
}
