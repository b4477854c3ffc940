//! OFDM burst and beacon synthesis, plus per-subcarrier CSI estimation.
//!
//! Numerology defaults follow a 20 MHz 802.11a/g/n channel: 64 subcarriers,
//! 52 active (DC excluded), four pilots and a quarter-symbol cyclic prefix.
//! The sample rate may exceed the bandwidth, in which case the symbol is
//! synthesized with a zero-padded IFFT of length `n_subcarriers * fs / bw`.
//!
//! Only complex baseband is modelled. The carrier frequency is metadata used
//! for wavelength and Doppler arithmetic downstream.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64, SPEED_OF_LIGHT};

/// 2.4 GHz ISM band centre used by the presets.
pub const CARRIER_2G4_HZ: f64 = 2.4e9;
/// 5.8 GHz band centre used by the presets.
pub const CARRIER_5G8_HZ: f64 = 5.8e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveformConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub n_subcarriers: usize,
    /// Active subcarriers, split evenly either side of DC.
    pub n_active: usize,
    pub sample_rate_hz: f64,
    pub beacon_interval_s: f64,
    pub burst_duration_s: f64,
    /// Cyclic prefix length as a fraction of the useful symbol.
    pub cp_fraction: f64,
    /// Number of subcarrier groups reported by CSI estimation.
    pub csi_groups: usize,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        Self {
            carrier_hz: CARRIER_2G4_HZ,
            bandwidth_hz: 20e6,
            n_subcarriers: 64,
            n_active: 52,
            sample_rate_hz: 20e6,
            beacon_interval_s: 0.1,
            burst_duration_s: 8e-6,
            cp_fraction: 0.25,
            csi_groups: 30,
        }
    }
}

impl WaveformConfig {
    pub fn preset_2g4() -> Self {
        Self::default()
    }

    pub fn preset_5g8() -> Self {
        Self {
            carrier_hz: CARRIER_5G8_HZ,
            ..Self::default()
        }
    }

    /// Reduced-rate numerology for scene simulation.
    ///
    /// Doppler processing only needs the sample rate to comfortably exceed
    /// twice the largest Doppler shift, so simulations of multi-second
    /// scenes run at a few kHz instead of 20 MHz.
    pub fn sensing(carrier_hz: f64, sample_rate_hz: f64) -> Self {
        let symbol_s = 80.0 / sample_rate_hz;
        Self {
            carrier_hz,
            bandwidth_hz: sample_rate_hz,
            sample_rate_hz,
            burst_duration_s: 2.0 * symbol_s,
            ..Self::default()
        }
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        self.bandwidth_hz / self.n_subcarriers as f64
    }

    /// IFFT length in samples (useful part of the symbol).
    pub fn fft_len(&self) -> usize {
        (self.sample_rate_hz / self.subcarrier_spacing_hz()).round() as usize
    }

    pub fn cp_len(&self) -> usize {
        (self.fft_len() as f64 * self.cp_fraction).round() as usize
    }

    pub fn symbol_len(&self) -> usize {
        self.fft_len() + self.cp_len()
    }

    pub fn symbol_duration_s(&self) -> f64 {
        self.symbol_len() as f64 / self.sample_rate_hz
    }

    /// Duration of one beacon burst (preamble + one data symbol).
    pub fn beacon_burst_duration_s(&self) -> f64 {
        2.0 * self.symbol_duration_s()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.carrier_hz) {
            return Err(Error::Config(format!("carrier_hz must be > 0, got {}", self.carrier_hz)));
        }
        if !positive(self.bandwidth_hz) {
            return Err(Error::Config(format!("bandwidth_hz must be > 0, got {}", self.bandwidth_hz)));
        }
        if !positive(self.sample_rate_hz) || self.sample_rate_hz < self.bandwidth_hz {
            return Err(Error::Config(format!(
                "sample_rate_hz ({}) must be >= bandwidth_hz ({})",
                self.sample_rate_hz, self.bandwidth_hz
            )));
        }
        if self.n_subcarriers < 4 {
            return Err(Error::Config("n_subcarriers must be >= 4".into()));
        }
        if self.n_active < 2 || self.n_active % 2 != 0 || self.n_active >= self.n_subcarriers {
            return Err(Error::Config(format!(
                "n_active must be even, >= 2 and < n_subcarriers, got {}",
                self.n_active
            )));
        }
        let ratio = self.sample_rate_hz / self.subcarrier_spacing_hz();
        if (ratio - ratio.round()).abs() > 1e-6 * ratio {
            return Err(Error::Config(format!(
                "sample_rate_hz must be an integer multiple of the subcarrier spacing ({} Hz)",
                self.subcarrier_spacing_hz()
            )));
        }
        if !(0.0..1.0).contains(&self.cp_fraction) {
            return Err(Error::Config("cp_fraction must lie in [0, 1)".into()));
        }
        if !positive(self.beacon_interval_s) || !positive(self.burst_duration_s) {
            return Err(Error::Config("beacon_interval_s and burst_duration_s must be > 0".into()));
        }
        if self.beacon_interval_s <= self.burst_duration_s {
            return Err(Error::Config(format!(
                "beacon_interval_s ({}) must exceed burst_duration_s ({})",
                self.beacon_interval_s, self.burst_duration_s
            )));
        }
        if self.csi_groups == 0 || self.csi_groups > self.n_active {
            return Err(Error::Config(format!(
                "csi_groups must lie in 1..={}, got {}",
                self.n_active, self.csi_groups
            )));
        }
        Ok(())
    }

    /// Logical subcarrier indices of the active set, ascending, DC excluded.
    pub fn active_subcarriers(&self) -> Vec<i64> {
        let half = (self.n_active / 2) as i64;
        (-half..=half).filter(|&k| k != 0).collect()
    }

    /// Logical indices carrying pilots (802.11 positions ±7, ±21 at 52 active).
    pub fn pilot_subcarriers(&self) -> Vec<i64> {
        let half = (self.n_active / 2) as f64;
        let mut inner = ((half * 7.0 / 26.0).round() as i64).max(1);
        let outer = ((half * 21.0 / 26.0).round() as i64).max(1);
        if inner == outer && outer > 1 {
            inner = outer - 1;
        }
        let mut pilots = vec![-outer, -inner, inner, outer];
        pilots.dedup();
        pilots
    }
}

/// Complex baseband sample stream.
#[derive(Debug, Clone, PartialEq)]
pub struct IqTrace {
    pub samples: Vec<C64>,
    pub sample_rate_hz: f64,
    pub carrier_hz: f64,
    pub t0_s: f64,
}

impl IqTrace {
    pub fn new(samples: Vec<C64>, sample_rate_hz: f64, carrier_hz: f64, t0_s: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Validation("IQ trace must contain at least one sample".into()));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Validation(format!("sample rate must be > 0, got {sample_rate_hz}")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            carrier_hz,
            t0_s,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Time of sample `n` in seconds.
    pub fn time_of(&self, n: usize) -> f64 {
        self.t0_s + n as f64 / self.sample_rate_hz
    }

    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }
}

pub(crate) fn mean_power(samples: &[C64]) -> f64 {
    samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64
}

fn normalize_power(samples: &mut [C64]) {
    let p = mean_power(samples);
    if p > 0.0 {
        let g = p.sqrt().recip();
        samples.iter_mut().for_each(|s| *s *= g);
    }
}

/// Channel estimate `h[i][j]` for receive antenna `i` and subcarrier group `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiMatrix {
    n_rx: usize,
    n_groups: usize,
    entries: Vec<C64>,
    group_freqs_hz: Vec<f64>,
}

impl CsiMatrix {
    pub fn new(n_rx: usize, n_groups: usize, entries: Vec<C64>, group_freqs_hz: Vec<f64>) -> Result<Self> {
        if n_rx == 0 || n_groups == 0 {
            return Err(Error::Shape("CSI matrix needs at least one antenna and one group".into()));
        }
        if entries.len() != n_rx * n_groups || group_freqs_hz.len() != n_groups {
            return Err(Error::Shape(format!(
                "expected {}x{} entries and {} group frequencies",
                n_rx, n_groups, n_groups
            )));
        }
        if entries.iter().any(|h| !h.re.is_finite() || !h.im.is_finite()) {
            return Err(Error::Validation("CSI entries must be finite".into()));
        }
        Ok(Self {
            n_rx,
            n_groups,
            entries,
            group_freqs_hz,
        })
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn get(&self, antenna: usize, group: usize) -> C64 {
        self.entries[antenna * self.n_groups + group]
    }

    pub fn amplitude(&self, antenna: usize, group: usize) -> f64 {
        self.get(antenna, group).norm()
    }

    /// Phase in radians, `arg h`.
    pub fn phase(&self, antenna: usize, group: usize) -> f64 {
        self.get(antenna, group).arg()
    }

    pub fn row(&self, antenna: usize) -> &[C64] {
        &self.entries[antenna * self.n_groups..(antenna + 1) * self.n_groups]
    }

    /// Baseband frequency offset of each group's centre, Hz.
    pub fn group_freqs_hz(&self) -> &[f64] {
        &self.group_freqs_hz
    }
}

/// What a synthesized OFDM symbol carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    /// Known BPSK training sequence on every active subcarrier.
    Preamble,
    /// Seeded QPSK data plus BPSK pilots.
    Data,
}

/// OFDM modulator bound to one configuration.
pub struct OfdmModulator {
    config: WaveformConfig,
    ifft: Arc<dyn Fft<f64>>,
    fft: Arc<dyn Fft<f64>>,
    active: Vec<i64>,
    pilots: Vec<i64>,
    preamble: Vec<C64>,
}

impl std::fmt::Debug for OfdmModulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OfdmModulator").field("config", &self.config).finish()
    }
}

impl OfdmModulator {
    pub fn new(config: &WaveformConfig) -> Result<Self> {
        config.validate()?;
        let n = config.fft_len();
        let mut planner = FftPlanner::new();
        let active = config.active_subcarriers();
        let preamble = training_sequence(active.len());
        Ok(Self {
            config: config.clone(),
            ifft: planner.plan_fft_inverse(n),
            fft: planner.plan_fft_forward(n),
            pilots: config.pilot_subcarriers(),
            active,
            preamble,
        })
    }

    pub fn config(&self) -> &WaveformConfig {
        &self.config
    }

    fn bin(&self, k: i64) -> usize {
        k.rem_euclid(self.config.fft_len() as i64) as usize
    }

    /// Frequency-domain values on the active subcarriers for one symbol.
    pub fn symbol_spectrum(&self, kind: SymbolKind, rng: &mut impl Rng) -> Vec<C64> {
        match kind {
            SymbolKind::Preamble => self.preamble.clone(),
            SymbolKind::Data => {
                let outer = self.pilots.iter().copied().max().unwrap_or(0);
                let s = std::f64::consts::FRAC_1_SQRT_2;
                self.active
                    .iter()
                    .map(|k| {
                        if self.pilots.contains(k) {
                            C64::new(if *k == outer { -1.0 } else { 1.0 }, 0.0)
                        } else {
                            let re = if rng.gen::<bool>() { s } else { -s };
                            let im = if rng.gen::<bool>() { s } else { -s };
                            C64::new(re, im)
                        }
                    })
                    .collect()
            }
        }
    }

    /// Time-domain symbol with cyclic prefix, not power normalized.
    pub fn modulate(&self, spectrum: &[C64]) -> Vec<C64> {
        let n = self.config.fft_len();
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for (k, x) in self.active.iter().zip(spectrum) {
            buf[self.bin(*k)] = *x;
        }
        self.ifft.process(&mut buf);
        let cp = self.config.cp_len();
        let mut out = Vec::with_capacity(n + cp);
        out.extend_from_slice(&buf[n - cp..]);
        out.extend_from_slice(&buf);
        out
    }

    /// Active-subcarrier spectrum of one received symbol (cyclic prefix included).
    pub fn demodulate(&self, symbol: &[C64]) -> Result<Vec<C64>> {
        let n = self.config.fft_len();
        let cp = self.config.cp_len();
        if symbol.len() != n + cp {
            return Err(Error::Shape(format!(
                "expected one OFDM symbol of {} samples, got {}",
                n + cp,
                symbol.len()
            )));
        }
        let mut buf = symbol[cp..].to_vec();
        self.fft.process(&mut buf);
        Ok(self.active.iter().map(|k| buf[self.bin(*k)]).collect())
    }

    /// One power-normalized symbol as a trace starting at `t0_s`.
    pub fn symbol_trace(&self, kind: SymbolKind, seed: u64) -> IqTrace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = self.modulate(&self.symbol_spectrum(kind, &mut rng));
        normalize_power(&mut samples);
        IqTrace {
            samples,
            sample_rate_hz: self.config.sample_rate_hz,
            carrier_hz: self.config.carrier_hz,
            t0_s: 0.0,
        }
    }
}

/// BPSK training sequence from the 802.11 scrambler LFSR (x^7 + x^4 + 1, all-ones seed).
fn training_sequence(len: usize) -> Vec<C64> {
    let mut state: u8 = 0x7f;
    (0..len)
        .map(|_| {
            let bit = ((state >> 6) ^ (state >> 3)) & 1;
            state = ((state << 1) | bit) & 0x7f;
            C64::new(if bit == 1 { 1.0 } else { -1.0 }, 0.0)
        })
        .collect()
}

/// Burst of back-to-back data symbols filling `config.burst_duration_s`, unit mean power.
pub fn gen_ofdm_burst(config: &WaveformConfig, seed: u64) -> Result<IqTrace> {
    let modem = OfdmModulator::new(config)?;
    let n_symbols = (config.burst_duration_s / config.symbol_duration_s() + 1e-9).floor() as usize;
    if n_symbols == 0 {
        return Err(Error::Config(format!(
            "burst_duration_s ({}) is shorter than one OFDM symbol ({})",
            config.burst_duration_s,
            config.symbol_duration_s()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_symbols * config.symbol_len());
    for _ in 0..n_symbols {
        let spectrum = modem.symbol_spectrum(SymbolKind::Data, &mut rng);
        samples.extend(modem.modulate(&spectrum));
    }
    normalize_power(&mut samples);
    IqTrace::new(samples, config.sample_rate_hz, config.carrier_hz, 0.0)
}

/// Continuous data transmission of roughly `duration_s` seconds.
pub fn gen_ofdm_stream(config: &WaveformConfig, duration_s: f64, seed: u64) -> Result<IqTrace> {
    let mut cfg = config.clone();
    cfg.burst_duration_s = duration_s.max(cfg.symbol_duration_s());
    cfg.beacon_interval_s = cfg.beacon_interval_s.max(cfg.burst_duration_s * 2.0);
    let mut trace = gen_ofdm_burst(&cfg, seed)?;
    let want = (duration_s * cfg.sample_rate_hz).round() as usize;
    if want > trace.samples.len() {
        // pad with a partial symbol so the stream covers the full span
        let mut extra = gen_ofdm_burst(&cfg, seed.wrapping_add(1))?;
        extra.samples.truncate(want - trace.samples.len());
        trace.samples.extend(extra.samples);
    }
    trace.samples.truncate(want.max(1));
    Ok(trace)
}

/// Number of whole beacon bursts that fit in `duration_s`.
pub fn beacon_count(config: &WaveformConfig, duration_s: f64) -> usize {
    let burst = config.beacon_burst_duration_s();
    if duration_s + 1e-12 < burst {
        return 0;
    }
    ((duration_s - burst) / config.beacon_interval_s + 1e-9).floor() as usize + 1
}

/// Beacon-mode transmission: a preamble + data symbol every `beacon_interval_s`, zeros between.
pub fn gen_beacon_train(config: &WaveformConfig, duration_s: f64, seed: u64) -> Result<IqTrace> {
    let modem = OfdmModulator::new(config)?;
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::Validation(format!("duration must be > 0, got {duration_s}")));
    }
    if config.beacon_interval_s <= config.beacon_burst_duration_s() {
        return Err(Error::Config("beacon interval shorter than one beacon burst".into()));
    }
    let n_bursts = beacon_count(config, duration_s);
    if n_bursts == 0 {
        return Err(Error::Validation(format!(
            "duration {duration_s} s is shorter than one beacon burst"
        )));
    }
    let fs = config.sample_rate_hz;
    let total = (duration_s * fs).round() as usize;
    let mut samples = vec![C64::new(0.0, 0.0); total];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for b in 0..n_bursts {
        let mut burst = modem.modulate(&modem.symbol_spectrum(SymbolKind::Preamble, &mut rng));
        burst.extend(modem.modulate(&modem.symbol_spectrum(SymbolKind::Data, &mut rng)));
        normalize_power(&mut burst);
        let start = (b as f64 * config.beacon_interval_s * fs).round() as usize;
        let end = (start + burst.len()).min(total);
        samples[start..end].copy_from_slice(&burst[..end - start]);
    }
    IqTrace::new(samples, fs, config.carrier_hz, 0.0)
}

/// Start/end sample indices of each beacon burst in a train (non-zero runs).
pub fn find_bursts(trace: &IqTrace) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (n, s) in trace.samples.iter().enumerate() {
        let on = s.re != 0.0 || s.im != 0.0;
        match (on, start) {
            (true, None) => start = Some(n),
            (false, Some(s0)) => {
                runs.push((s0, n));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s0) = start {
        runs.push((s0, trace.samples.len()));
    }
    runs
}

/// Contiguous grouping of `n_active` subcarriers into `n_groups` near-equal runs.
pub fn subcarrier_groups(n_active: usize, n_groups: usize) -> Vec<std::ops::Range<usize>> {
    (0..n_groups)
        .map(|g| (g * n_active / n_groups)..((g + 1) * n_active / n_groups))
        .collect()
}

/// Per-antenna CSI from one received symbol per antenna and the known transmitted symbol.
///
/// Each entry is the ratio of received to transmitted subcarrier values,
/// averaged over adjacent active subcarriers into `config.csi_groups` groups.
pub fn estimate_csi(received: &[IqTrace], config: &WaveformConfig, transmitted: &IqTrace) -> Result<CsiMatrix> {
    if received.is_empty() {
        return Err(Error::Shape("need at least one receive antenna".into()));
    }
    let modem = OfdmModulator::new(config)?;
    let tx = modem.demodulate(&transmitted.samples)?;
    let floor = 1e-20 * tx.iter().map(|x| x.norm_sqr()).fold(0.0, f64::max);
    if let Some(j) = tx.iter().position(|x| x.norm_sqr() <= floor) {
        return Err(Error::DivisionByZero(format!(
            "transmitted symbol is zero on active subcarrier {}",
            config.active_subcarriers()[j]
        )));
    }
    let groups = subcarrier_groups(config.n_active, config.csi_groups);
    let active = config.active_subcarriers();
    let df = config.subcarrier_spacing_hz();
    let group_freqs_hz = groups
        .iter()
        .map(|r| active[r.clone()].iter().map(|&k| k as f64 * df).sum::<f64>() / r.len() as f64)
        .collect();

    let mut entries = Vec::with_capacity(received.len() * groups.len());
    for rx in received {
        if (rx.sample_rate_hz - config.sample_rate_hz).abs() > 1e-9 * config.sample_rate_hz {
            return Err(Error::Shape("received symbol sample rate differs from config".into()));
        }
        let ry = modem.demodulate(&rx.samples)?;
        let ratio: Vec<C64> = ry.iter().zip(&tx).map(|(y, x)| y / x).collect();
        entries.extend(
            groups
                .iter()
                .map(|r| ratio[r.clone()].iter().sum::<C64>() / r.len() as f64),
        );
    }
    CsiMatrix::new(received.len(), groups.len(), entries, group_freqs_hz)
}

/// Apply a per-active-subcarrier frequency response to one time-domain symbol.
pub fn apply_frequency_response(symbol: &IqTrace, config: &WaveformConfig, gains: &[C64]) -> Result<IqTrace> {
    let modem = OfdmModulator::new(config)?;
    let spectrum = modem.demodulate(&symbol.samples)?;
    if gains.len() != spectrum.len() {
        return Err(Error::Shape(format!(
            "expected {} subcarrier gains, got {}",
            spectrum.len(),
            gains.len()
        )));
    }
    let shaped: Vec<C64> = spectrum.iter().zip(gains).map(|(x, g)| x * g).collect();
    // demodulate() is an unnormalized forward FFT; undo its gain
    let scale = 1.0 / config.fft_len() as f64;
    let samples = modem.modulate(&shaped).into_iter().map(|s| s * scale).collect();
    IqTrace::new(samples, symbol.sample_rate_hz, symbol.carrier_hz, symbol.t0_s)
}
