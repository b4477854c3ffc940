//! Respiration rate from the phase of the cross-correlated reference and
//! surveillance channels.
//!
//! Each epoch's phase is `arg Σ ref* · surv`; the epoch phases are unwrapped,
//! cleaned with a Hampel filter and the breathing rate is read off the peak
//! of the periodogram inside the respiration band.

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::waveform::IqTrace;
use crate::{Error, Result, C64};

/// MAD → standard deviation factor for Gaussian data.
pub const MAD_SCALE: f64 = 1.4826;

/// Phase change produced by a displacement, using the one-way `2π d / λ` convention.
pub fn phase_sensitivity(displacement_m: f64, wavelength_m: f64) -> Result<f64> {
    if !(wavelength_m > 0.0 && wavelength_m.is_finite()) {
        return Err(Error::Validation(format!("wavelength must be > 0, got {wavelength_m}")));
    }
    if !(displacement_m >= 0.0) {
        return Err(Error::Validation(format!("displacement must be >= 0, got {displacement_m}")));
    }
    Ok(2.0 * PI * displacement_m / wavelength_m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrace {
    pub phase_rad: Vec<f64>,
    pub epoch_s: f64,
    /// Start time of the first epoch.
    #[serde(default)]
    pub t0_s: f64,
}

impl PhaseTrace {
    pub fn new(phase_rad: Vec<f64>, epoch_s: f64, t0_s: f64) -> Result<Self> {
        if !(epoch_s > 0.0) {
            return Err(Error::Validation("epoch duration must be > 0".into()));
        }
        if phase_rad.iter().any(|p| !p.is_finite()) {
            return Err(Error::Validation("phase values must be finite".into()));
        }
        Ok(Self { phase_rad, epoch_s, t0_s })
    }

    pub fn len(&self) -> usize {
        self.phase_rad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phase_rad.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.phase_rad.len() as f64 * self.epoch_s
    }

    /// Centre time of epoch `i`.
    pub fn time_of(&self, i: usize) -> f64 {
        self.t0_s + (i as f64 + 0.5) * self.epoch_s
    }

    fn with_values(&self, phase_rad: Vec<f64>) -> Self {
        Self {
            phase_rad,
            ..self.clone()
        }
    }
}

/// Removes 2π jumps between consecutive samples.
pub fn unwrap_phase(wrapped: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(wrapped.len());
    let mut offset = 0.0;
    for (i, &p) in wrapped.iter().enumerate() {
        if i > 0 {
            let d = p - wrapped[i - 1];
            if d > PI {
                offset -= 2.0 * PI;
            } else if d < -PI {
                offset += 2.0 * PI;
            }
        }
        out.push(p + offset);
    }
    out
}

/// Per-epoch phase of `Σ ref* · surv`, unwrapped across epochs.
pub fn extract_phase(reference: &IqTrace, surv: &IqTrace, epoch_s: f64) -> Result<PhaseTrace> {
    let fs = reference.sample_rate_hz;
    if (surv.sample_rate_hz - fs).abs() > 1e-9 * fs {
        return Err(Error::Shape("reference and surveillance sample rates differ".into()));
    }
    if reference.len() != surv.len() {
        return Err(Error::Shape("reference and surveillance lengths differ".into()));
    }
    let per_epoch = (epoch_s * fs).round() as usize;
    if per_epoch < 10 {
        return Err(Error::Validation(format!(
            "epoch of {epoch_s} s spans {per_epoch} samples; at least 10 required"
        )));
    }
    if per_epoch > reference.len() {
        return Err(Error::Range(format!(
            "epoch of {epoch_s} s exceeds signal duration {} s",
            reference.duration_s()
        )));
    }
    let wrapped: Vec<f64> = reference
        .samples
        .chunks_exact(per_epoch)
        .zip(surv.samples.chunks_exact(per_epoch))
        .map(|(r, s)| r.iter().zip(s).map(|(a, b)| a.conj() * b).sum::<C64>().arg())
        .collect();
    PhaseTrace::new(unwrap_phase(&wrapped), per_epoch as f64 / fs, reference.t0_s)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Passes run by [`hampel`] before giving up on reaching a fixed point.
pub const HAMPEL_MAX_PASSES: usize = 64;

fn hampel_pass(x: &[f64], window: usize, k: f64) -> Vec<f64> {
    let half = window / 2;
    let mut buf = Vec::with_capacity(window);
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            buf.clear();
            buf.extend_from_slice(&x[lo..hi]);
            let med = median(&mut buf);
            buf.iter_mut().for_each(|v| *v = (*v - med).abs());
            let mad = median(&mut buf);
            if (x[i] - med).abs() > k * MAD_SCALE * mad {
                med
            } else {
                x[i]
            }
        })
        .collect()
}

/// Sliding-window Hampel filter.
///
/// In one pass a sample is replaced by its window median when it deviates
/// from that median by more than `k * 1.4826 * MAD`; windows are truncated
/// at the edges and all statistics come from the pass input. Passes repeat
/// until nothing changes (at most [`HAMPEL_MAX_PASSES`]), so the output is
/// a fixed point of the filter.
pub fn hampel(trace: &PhaseTrace, window: usize, k: f64) -> Result<PhaseTrace> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::Validation(format!("Hampel window must be odd and >= 3, got {window}")));
    }
    if !(k > 0.0) {
        return Err(Error::Validation(format!("Hampel k must be > 0, got {k}")));
    }
    let mut current = trace.phase_rad.clone();
    for _ in 0..HAMPEL_MAX_PASSES {
        let next = hampel_pass(&current, window, k);
        if next == current {
            break;
        }
        current = next;
    }
    Ok(trace.with_values(current))
}

/// One Hampel pass, without iterating to a fixed point.
pub fn hampel_single_pass(trace: &PhaseTrace, window: usize, k: f64) -> Result<PhaseTrace> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::Validation(format!("Hampel window must be odd and >= 3, got {window}")));
    }
    if !(k > 0.0) {
        return Err(Error::Validation(format!("Hampel k must be > 0, got {k}")));
    }
    Ok(trace.with_values(hampel_pass(&trace.phase_rad, window, k)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RespirationEstimate {
    pub rate_hz: f64,
    pub rate_bpm: f64,
    pub peak_to_peak_rad: f64,
    pub band: [f64; 2],
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Dominant in-band rate of a phase trace.
///
/// The zero-mean trace is zero-padded to at least 16× its length, the peak
/// periodogram bin within `band` is located and refined by fitting a
/// parabola through it and its neighbours.
pub fn estimate_rate(trace: &PhaseTrace, band: [f64; 2]) -> Result<RespirationEstimate> {
    let [f_lo, f_hi] = band;
    let nyquist = 0.5 / trace.epoch_s;
    if !(f_lo > 0.0 && f_hi > f_lo && f_hi <= nyquist) {
        return Err(Error::Validation(format!(
            "band [{f_lo}, {f_hi}] Hz must satisfy 0 < lo < hi <= {nyquist}"
        )));
    }
    if trace.duration_s() + 1e-9 < 3.0 / f_lo {
        return Err(Error::Validation(format!(
            "trace of {} s is shorter than three periods of {f_lo} Hz",
            trace.duration_s()
        )));
    }
    let n = trace.len();
    let mean = trace.phase_rad.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = trace.phase_rad.iter().map(|p| p - mean).collect();

    let nfft = (16 * n).next_power_of_two();
    let mut buf: Vec<C64> = centred.iter().map(|v| C64::new(*v, 0.0)).collect();
    buf.resize(nfft, C64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
    let power: Vec<f64> = buf[..nfft / 2 + 1].iter().map(|c| c.norm_sqr()).collect();
    let df = 1.0 / (nfft as f64 * trace.epoch_s);

    let lo = (f_lo / df).ceil() as usize;
    let hi = ((f_hi / df).floor() as usize).min(power.len() - 1);
    let (peak, peak_power) = (lo..=hi)
        .map(|i| (i, power[i]))
        .fold((lo, f64::MIN), |best, cur| if cur.1 > best.1 { cur } else { best });
    if !(peak_power > 1e-20 * n as f64) {
        return Err(Error::NoDetection(format!("no in-band energy in [{f_lo}, {f_hi}] Hz")));
    }
    let offset = if peak > 0 && peak + 1 < power.len() {
        let (a, b, c) = (power[peak - 1], power[peak], power[peak + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    } else {
        0.0
    };
    let rate_hz = ((peak as f64 + offset) * df).clamp(f_lo, f_hi);

    let mut sorted = centred;
    sorted.sort_by(f64::total_cmp);
    let peak_to_peak_rad = percentile(&sorted, 0.98) - percentile(&sorted, 0.02);
    Ok(RespirationEstimate {
        rate_hz,
        rate_bpm: 60.0 * rate_hz,
        peak_to_peak_rad,
        band,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RespirationConfig {
    pub epoch_s: f64,
    pub hampel_window: usize,
    pub hampel_k: f64,
    pub band_hz: [f64; 2],
}

impl Default for RespirationConfig {
    fn default() -> Self {
        Self {
            epoch_s: 0.1,
            hampel_window: 11,
            hampel_k: 3.0,
            band_hz: [0.1, 0.5],
        }
    }
}

/// Phase extraction, Hampel cleaning and rate estimation in one call.
#[derive(Debug, Clone, PartialEq)]
pub struct RespirationReport {
    pub raw: PhaseTrace,
    pub filtered: PhaseTrace,
    pub estimate: RespirationEstimate,
}

pub fn analyze(reference: &IqTrace, surv: &IqTrace, config: &RespirationConfig) -> Result<RespirationReport> {
    let raw = extract_phase(reference, surv, config.epoch_s)?;
    let filtered = hampel(&raw, config.hampel_window, config.hampel_k)?;
    let estimate = estimate_rate(&filtered, config.band_hz)?;
    Ok(RespirationReport { raw, filtered, estimate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{gen_ofdm_stream, WaveformConfig, CARRIER_2G4_HZ, CARRIER_5G8_HZ};
    use crate::SPEED_OF_LIGHT;

    fn trace(values: Vec<f64>) -> PhaseTrace {
        PhaseTrace::new(values, 0.1, 0.0).unwrap()
    }

    #[test]
    fn sensitivity_values() {
        let l24 = SPEED_OF_LIGHT / CARRIER_2G4_HZ;
        let l58 = SPEED_OF_LIGHT / CARRIER_5G8_HZ;
        assert!((phase_sensitivity(0.005, l24).unwrap() - 0.2515).abs() < 5e-4);
        assert!((phase_sensitivity(0.02, l58).unwrap() - 2.431).abs() < 1e-3);
        assert_eq!(phase_sensitivity(0.0, l24).unwrap(), 0.0);
        assert!(phase_sensitivity(0.01, 0.0).is_err());
        assert!(phase_sensitivity(-0.01, l24).is_err());
    }

    #[test]
    fn unwrap_removes_jumps() {
        let truth: Vec<f64> = (0..50).map(|i| 0.4 * i as f64).collect();
        let wrapped: Vec<f64> = truth.iter().map(|p| C64::from_polar(1.0, *p).arg()).collect();
        let un = unwrap_phase(&wrapped);
        for (a, b) in un.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    fn channels(phase: impl Fn(f64) -> f64, secs: f64) -> (IqTrace, IqTrace) {
        let r = gen_ofdm_stream(&WaveformConfig::sensing(CARRIER_2G4_HZ, 2000.0), secs, 1).unwrap();
        let s = IqTrace {
            samples: r
                .samples
                .iter()
                .enumerate()
                .map(|(n, v)| v * C64::from_polar(1.0, phase(r.time_of(n))))
                .collect(),
            ..r.clone()
        };
        (r, s)
    }

    #[test]
    fn extract_identity_and_constant_rotation() {
        let (r, _) = channels(|_| 0.0, 2.0);
        let p = extract_phase(&r, &r, 0.1).unwrap();
        assert_eq!(p.len(), 20);
        assert!(p.phase_rad.iter().all(|v| v.abs() < 1e-12));
        let (r, s) = channels(|_| 0.7, 2.0);
        let p = extract_phase(&r, &s, 0.1).unwrap();
        assert!(p.phase_rad.iter().all(|v| (v - 0.7).abs() < 1e-6));
    }

    #[test]
    fn extract_follows_injected_breathing_phase() {
        let phi = |t: f64| 0.25 * (2.0 * PI * 0.3 * t).sin();
        let (r, s) = channels(phi, 20.0);
        let p = extract_phase(&r, &s, 0.1).unwrap();
        for (i, v) in p.phase_rad.iter().enumerate() {
            assert!((v - phi(p.time_of(i))).abs() < 0.01, "epoch {i}");
        }
    }

    #[test]
    fn extract_errors() {
        let (r, s) = channels(|_| 0.0, 1.0);
        assert!(matches!(extract_phase(&r, &s, 2.0), Err(Error::Range(_))));
        assert!(matches!(extract_phase(&r, &s, 0.001), Err(Error::Validation(_))));
    }

    #[test]
    fn hampel_examples() {
        let mut spike = vec![1.5; 21];
        spike[10] += 10.0;
        let out = hampel(&trace(spike), 5, 3.0).unwrap();
        assert!(out.phase_rad.iter().all(|v| *v == 1.5));

        let ramp: Vec<f64> = (0..30).map(|i| i as f64 * 0.2).collect();
        assert_eq!(hampel(&trace(ramp.clone()), 5, 3.0).unwrap().phase_rad, ramp);

        let out = hampel(&trace(vec![0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0]), 5, 3.0).unwrap();
        assert_eq!(out.phase_rad, vec![0.0; 7]);

        assert!(hampel(&trace(vec![0.0; 5]), 4, 3.0).is_err());
        assert!(hampel(&trace(vec![0.0; 5]), 1, 3.0).is_err());
        assert!(hampel(&trace(vec![0.0; 5]), 3, 0.0).is_err());
    }

    fn sine(rate: f64, amp: f64, secs: f64) -> PhaseTrace {
        let n = (secs / 0.1) as usize;
        trace((0..n).map(|i| amp * (2.0 * PI * rate * (i as f64 + 0.5) * 0.1).sin()).collect())
    }

    #[test]
    fn rate_of_pure_sinusoid() {
        let est = estimate_rate(&sine(0.3, 0.25, 60.0), [0.1, 0.5]).unwrap();
        assert!((est.rate_hz - 0.3).abs() < 0.005, "{}", est.rate_hz);
        assert!((est.rate_bpm - 60.0 * est.rate_hz).abs() < 1e-12);
        assert!((est.peak_to_peak_rad - 0.5).abs() < 0.01);
    }

    #[test]
    fn rate_off_grid_refines_between_bins() {
        let est = estimate_rate(&sine(0.2713, 1.0, 45.0), [0.1, 0.5]).unwrap();
        assert!((est.rate_hz - 0.2713).abs() < 0.002, "{}", est.rate_hz);
    }

    #[test]
    fn rate_errors() {
        assert!(matches!(estimate_rate(&sine(0.3, 1.0, 20.0), [0.1, 0.5]), Err(Error::Validation(_))));
        assert!(matches!(estimate_rate(&trace(vec![2.0; 600]), [0.1, 0.5]), Err(Error::NoDetection(_))));
        assert!(estimate_rate(&sine(0.3, 1.0, 60.0), [0.5, 0.1]).is_err());
    }

    #[test]
    fn rate_invariant_to_offset_and_sign() {
        let base = sine(0.22, 0.6, 60.0);
        let a = estimate_rate(&base, [0.1, 0.5]).unwrap();
        let shifted = base.with_values(base.phase_rad.iter().map(|v| 3.0 - v).collect());
        let b = estimate_rate(&shifted, [0.1, 0.5]).unwrap();
        assert!((a.rate_hz - b.rate_hz).abs() < 1e-12);
        assert!((a.peak_to_peak_rad - b.peak_to_peak_rad).abs() < 1e-12);
    }
}
