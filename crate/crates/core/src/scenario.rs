//! Canned end-to-end scenarios on synthetic data.
//!
//! * Case 1: through-wall respiration monitoring from carrier phase.
//! * Case 2: six-gesture recognition with a two-receiver setup.
//! * Case 3: a long activity session summarised into activity levels and
//!   smoothed gesture labels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_scene, respiration_track, ChannelOutput, GestureKinematics, GestureLabel, Scene, ScattererKind, TrackBuilder, Vec3};
use crate::doppler::{caf_batch, doppler_envelope, CafConfig, DopplerSpectrogram, EnvelopeNorm};
use crate::monitor::{default_transition_model, intensity_epochs, summarize, ActivitySummary, IntensityTrace, DEFAULT_T1, DEFAULT_T2};
use crate::recognition::{recording_window, GestureModel, GestureWindow, ModelConfig};
use crate::respiration::{analyze, RespirationConfig, RespirationReport};
use crate::waveform::{gen_ofdm_stream, WaveformConfig, CARRIER_2G4_HZ};
use crate::{Error, Result};

/// Mixes `index` into `seed` (splitmix64 finalizer) for independent sub-streams.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Through-wall breathing scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RespirationScenario {
    pub carrier_hz: f64,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub rate_hz: f64,
    pub amplitude_m: f64,
    pub wall_attenuation_db: f64,
    pub direct_leakage_db: f64,
    pub snr_db: f64,
    pub tx_pos: Vec3,
    pub ref_rx_pos: Vec3,
    pub surv_rx_pos: Vec3,
    pub chest_pos: Vec3,
    pub analysis: RespirationConfig,
}

impl Default for RespirationScenario {
    fn default() -> Self {
        Self {
            carrier_hz: CARRIER_2G4_HZ,
            sample_rate_hz: 1000.0,
            duration_s: 60.0,
            rate_hz: 0.25,
            amplitude_m: 0.01,
            wall_attenuation_db: 20.0,
            direct_leakage_db: 30.0,
            snr_db: 10.0,
            tx_pos: [0.0, 0.0, 1.0],
            ref_rx_pos: [0.0, 0.5, 1.0],
            surv_rx_pos: [0.5, -0.5, 1.0],
            chest_pos: [3.0, 1.0, 1.0],
            analysis: RespirationConfig::default(),
        }
    }
}

impl RespirationScenario {
    pub fn scene(&self) -> Result<Scene> {
        let chest = respiration_track(self.rate_hz, self.amplitude_m, self.chest_pos, self.duration_s, self.tx_pos)?;
        let mut scene = Scene {
            tx_pos: self.tx_pos,
            ref_rx_pos: self.ref_rx_pos,
            surv_rx_pos: vec![self.surv_rx_pos],
            scatterers: vec![chest],
            wall_attenuation_db: self.wall_attenuation_db,
            direct_leakage_db: self.direct_leakage_db,
            noise_power: 0.0,
        };
        scene.noise_power = scene.noise_power_for_snr(1.0, self.snr_db);
        Ok(scene)
    }

    pub fn simulate(&self, seed: u64) -> Result<ChannelOutput> {
        let cfg = WaveformConfig::sensing(self.carrier_hz, self.sample_rate_hz);
        let tx = gen_ofdm_stream(&cfg, self.duration_s, derive_seed(seed, 0))?;
        apply_scene(&tx, &self.scene()?, derive_seed(seed, 1))
    }

    pub fn run(&self, seed: u64) -> Result<(ChannelOutput, RespirationReport)> {
        let ch = self.simulate(seed)?;
        let report = analyze(&ch.reference, &ch.surveillance[0], &self.analysis)?;
        Ok((ch, report))
    }
}

/// Two-receiver room used for gesture recordings.
pub fn gesture_room() -> Scene {
    Scene {
        tx_pos: [-3.0, 0.0, 1.0],
        ref_rx_pos: [-3.0, 0.5, 1.0],
        surv_rx_pos: vec![[-3.0, 2.0, 1.0], [0.0, -3.0, 1.0]],
        scatterers: vec![],
        wall_attenuation_db: 0.0,
        direct_leakage_db: 30.0,
        noise_power: 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GestureSuiteConfig {
    pub carrier_hz: f64,
    pub sample_rate_hz: f64,
    pub per_class: usize,
    pub holdout_fraction: f64,
    pub snr_db: f64,
    /// Rest before and after each gesture, seconds.
    pub lead_s: f64,
    pub tail_s: f64,
    pub room: Scene,
    pub anchor: Vec3,
    pub kinematics: GestureKinematics,
    pub caf: CafConfig,
    pub model: ModelConfig,
    pub knn_k: usize,
}

impl Default for GestureSuiteConfig {
    fn default() -> Self {
        Self {
            carrier_hz: CARRIER_2G4_HZ,
            sample_rate_hz: 1000.0,
            per_class: 50,
            holdout_fraction: 0.2,
            snr_db: 10.0,
            lead_s: 1.0,
            tail_s: 1.0,
            room: gesture_room(),
            anchor: [1.0, 0.0, 1.0],
            kinematics: GestureKinematics::default(),
            caf: CafConfig::default(),
            model: ModelConfig::default(),
            knn_k: 3,
        }
    }
}

impl GestureSuiteConfig {
    fn scene_with(&self, track: crate::channel::ScattererTrack) -> Scene {
        let mut scene = self.room.clone();
        scene.noise_power = scene.noise_power_for_snr(self.kinematics.reflectivity, self.snr_db);
        scene.scatterers = vec![track];
        scene
    }

    fn spectrograms(&self, channels: &ChannelOutput) -> Result<Vec<DopplerSpectrogram>> {
        channels
            .surveillance
            .iter()
            .map(|s| caf_batch(&channels.reference, s, &self.caf))
            .collect()
    }

    /// Per-receiver spectrograms of one isolated gesture.
    pub fn record(&self, label: GestureLabel, seed: u64) -> Result<Vec<DopplerSpectrogram>> {
        let track = TrackBuilder::new(0.0, self.anchor, self.kinematics.motion_axis)?
            .rest_until(self.lead_s)
            .gesture(label, &self.kinematics, derive_seed(seed, 0));
        let end = track.end_time() + self.tail_s;
        let track = track
            .rest_until(end)
            .build(self.kinematics.reflectivity, ScattererKind::Gesture(label))?;
        let cfg = WaveformConfig::sensing(self.carrier_hz, self.sample_rate_hz);
        let tx = gen_ofdm_stream(&cfg, end, derive_seed(seed, 1))?;
        let channels = apply_scene(&tx, &self.scene_with(track), derive_seed(seed, 2))?;
        self.spectrograms(&channels)
    }

    /// Stacked gesture window of one recording, `None` if nothing was detected.
    pub fn window(&self, specs: &[DopplerSpectrogram]) -> Result<Option<GestureWindow>> {
        recording_window(specs, &self.model.segment)
    }
}

/// One simulated recording of the suite.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub label: GestureLabel,
    pub seed: u64,
    pub holdout: bool,
    pub window: Option<GestureWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub n_train: usize,
    pub n_test: usize,
    /// Recordings in which no gesture window was found (train and test).
    pub n_undetected: usize,
    pub src_accuracy: f64,
    pub knn_accuracy: f64,
    /// `confusion[true][predicted]` for SRC on the held-out set; an
    /// undetected test recording counts as an error and is not tabulated.
    pub confusion: Vec<Vec<usize>>,
}

/// Simulates `per_class` recordings of every gesture; the last
/// `holdout_fraction` of each class (after a seeded shuffle) is held out.
pub fn simulate_suite(cfg: &GestureSuiteConfig, seed: u64) -> Result<Vec<Recording>> {
    if cfg.per_class < 2 {
        return Err(Error::Config("per_class must be >= 2".into()));
    }
    if !(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 1.0) {
        return Err(Error::Config("holdout_fraction must lie in (0, 1)".into()));
    }
    let n_test = ((cfg.per_class as f64 * cfg.holdout_fraction).round() as usize).clamp(1, cfg.per_class - 1);
    let mut jobs = Vec::new();
    for label in GestureLabel::ALL {
        let mut order: Vec<usize> = (0..cfg.per_class).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1000 + label.index() as u64));
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        for (pos, &rep) in order.iter().enumerate() {
            let s = derive_seed(seed, (label.index() * 100_000 + rep) as u64);
            jobs.push((label, s, pos >= cfg.per_class - n_test));
        }
    }
    jobs.into_par_iter()
        .map(|(label, s, holdout)| {
            let specs = cfg.record(label, s)?;
            Ok(Recording {
                label,
                seed: s,
                holdout,
                window: cfg.window(&specs)?,
            })
        })
        .collect()
}

pub fn train_on(recordings: &[Recording], config: &ModelConfig) -> Result<GestureModel> {
    let (windows, labels): (Vec<GestureWindow>, Vec<GestureLabel>) = recordings
        .iter()
        .filter(|r| !r.holdout)
        .filter_map(|r| r.window.clone().map(|w| (w, r.label)))
        .unzip();
    GestureModel::train(&windows, &labels, config)
}

pub fn evaluate(model: &GestureModel, recordings: &[Recording], knn_k: usize) -> Result<SuiteReport> {
    let mut confusion = vec![vec![0usize; 6]; 6];
    let (mut src_ok, mut knn_ok, mut n_test) = (0usize, 0usize, 0usize);
    for r in recordings.iter().filter(|r| r.holdout) {
        n_test += 1;
        let Some(w) = &r.window else { continue };
        let pred = model.classify_window(w)?.label;
        confusion[r.label.index()][pred.index()] += 1;
        src_ok += usize::from(pred == r.label);
        knn_ok += usize::from(model.classify_window_knn(w, knn_k)? == r.label);
    }
    Ok(SuiteReport {
        n_train: model.dictionary.n_atoms(),
        n_test,
        n_undetected: recordings.iter().filter(|r| r.window.is_none()).count(),
        src_accuracy: src_ok as f64 / n_test.max(1) as f64,
        knn_accuracy: knn_ok as f64 / n_test.max(1) as f64,
        confusion,
    })
}

pub fn run_suite(cfg: &GestureSuiteConfig, seed: u64) -> Result<(GestureModel, SuiteReport)> {
    let recordings = simulate_suite(cfg, seed)?;
    let model = train_on(&recordings, &cfg.model)?;
    let report = evaluate(&model, &recordings, cfg.knn_k)?;
    Ok((model, report))
}

/// Long monitoring session: bouts of activity separated by rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub duration_s: f64,
    pub epoch_len_s: f64,
    /// Probability that a given minute is a rest minute with no gestures.
    pub rest_probability: f64,
    /// Idle time between gestures inside an active minute, seconds `[min, max]`.
    pub idle_range_s: [f64; 2],
    pub t1: f64,
    pub t2: f64,
    pub suite: GestureSuiteConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        let suite = GestureSuiteConfig {
            per_class: 10,
            sample_rate_hz: 400.0,
            ..GestureSuiteConfig::default()
        };
        Self {
            duration_s: 1200.0,
            epoch_len_s: 60.0,
            rest_probability: 0.4,
            idle_range_s: [0.5, 12.0],
            t1: DEFAULT_T1,
            t2: DEFAULT_T2,
            suite,
        }
    }
}

/// A gesture placed in a session, with its ground-truth span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacedGesture {
    pub start_s: f64,
    pub end_s: f64,
    pub label: GestureLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutput {
    pub truth: Vec<PlacedGesture>,
    pub spectrograms: Vec<DopplerSpectrogram>,
    pub intensity: IntensityTrace,
    pub summary: ActivitySummary,
}

/// Draws a gesture sequence from the default transition model (idle
/// excluded) and lays it out over the session.
pub fn plan_session(cfg: &SessionConfig, seed: u64) -> Result<(Vec<PlacedGesture>, crate::channel::ScattererTrack)> {
    if !(cfg.duration_s >= 60.0) {
        return Err(Error::Config("session must last at least one minute".into()));
    }
    let kin = &cfg.suite.kinematics;
    let model = default_transition_model();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 7));
    let mut builder = TrackBuilder::new(0.0, cfg.suite.anchor, kin.motion_axis)?;
    let mut placed = Vec::new();
    let mut prev: Option<usize> = None;
    let n_minutes = (cfg.duration_s / 60.0).floor() as usize;
    for minute in 0..n_minutes {
        let m0 = minute as f64 * 60.0;
        let m1 = m0 + 60.0;
        builder = builder.rest_until(m0);
        if rng.gen_bool(cfg.rest_probability.clamp(0.0, 1.0)) {
            continue;
        }
        loop {
            let idle = rng.gen_range(cfg.idle_range_s[0]..=cfg.idle_range_s[1].max(cfg.idle_range_s[0]));
            let start = builder.end_time() + idle;
            if start + 4.5 > m1.min(cfg.duration_s - 1.0) {
                break;
            }
            let row: Vec<f64> = match prev {
                Some(p) => model.probabilities[p][..6].to_vec(),
                None => vec![1.0; 6],
            };
            let total: f64 = row.iter().sum();
            let mut u = rng.gen::<f64>() * total;
            let mut next = 5;
            for (i, p) in row.iter().enumerate() {
                if u < *p {
                    next = i;
                    break;
                }
                u -= p;
            }
            let label = GestureLabel::ALL[next];
            builder = builder.rest_until(start).gesture(label, kin, rng.gen());
            placed.push(PlacedGesture {
                start_s: start,
                end_s: builder.end_time(),
                label,
            });
            prev = Some(next);
        }
    }
    let track = builder
        .rest_until(cfg.duration_s)
        .build(kin.reflectivity, ScattererKind::Static)?;
    Ok((placed, track))
}

pub fn run_session(cfg: &SessionConfig, seed: u64) -> Result<SessionOutput> {
    let (truth, track) = plan_session(cfg, seed)?;
    let suite = &cfg.suite;
    let wf = WaveformConfig::sensing(suite.carrier_hz, suite.sample_rate_hz);
    let tx = gen_ofdm_stream(&wf, cfg.duration_s, derive_seed(seed, 8))?;
    let channels = apply_scene(&tx, &suite.scene_with(track), derive_seed(seed, 9))?;
    let spectrograms = suite.spectrograms(&channels)?;
    // full-strength reflection energy of one batch
    let batch = (suite.caf.batch_len_s * suite.sample_rate_hz).round();
    let norm = (suite.kinematics.reflectivity * batch).powi(2);
    let env = doppler_envelope(&spectrograms[0], suite.model.segment.exclude_hz, EnvelopeNorm::Fixed(norm))?;
    let intensity = intensity_epochs(&env, 0.0, cfg.epoch_len_s)?;
    let summary = summarize(&intensity, cfg.t1, cfg.t2)?;
    Ok(SessionOutput {
        truth,
        spectrograms,
        intensity,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_and_repeat() {
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
        assert_ne!(derive_seed(7, 3), derive_seed(7, 4));
        assert_ne!(derive_seed(7, 3), derive_seed(8, 3));
    }

    #[test]
    fn fall_recording_has_a_window() {
        let cfg = GestureSuiteConfig::default();
        let specs = cfg.record(GestureLabel::Fall, 5).unwrap();
        assert_eq!(specs.len(), 2);
        let w = cfg.window(&specs).unwrap().expect("fall is detected");
        assert!(w.start_s > 0.3 && w.end_s < specs[0].batch_times_s.last().unwrap() + 0.5);
    }

    #[test]
    fn session_plan_fits_and_is_ordered() {
        let cfg = SessionConfig {
            duration_s: 300.0,
            ..SessionConfig::default()
        };
        let (placed, track) = plan_session(&cfg, 3).unwrap();
        assert!(!placed.is_empty());
        assert!(placed.windows(2).all(|w| w[0].end_s <= w[1].start_s));
        assert!(placed.last().unwrap().end_s <= 300.0);
        assert_eq!(track.span().1, 300.0);
    }
}
