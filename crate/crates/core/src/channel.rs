//! Bistatic scene simulation.
//!
//! A transmitter illuminates the room; a reference receiver captures the
//! direct path and one or more surveillance receivers capture reflections
//! from moving scatterers (a gesturing torso, a breathing chest) plus a
//! small amount of direct-path leakage and white noise.
//!
//! Delays are applied as nearest-sample shifts and the carrier phase is
//! rotated continuously by `exp(-j 2π R(t) / λ)`, so Doppler is carried
//! entirely by the phase of each reflection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::waveform::IqTrace;
use crate::{Error, Result, C64, SPEED_OF_LIGHT};

pub type Vec3 = [f64; 3];

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn dist(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

fn axpy(base: Vec3, dir: Vec3, s: f64) -> Vec3 {
    [base[0] + s * dir[0], base[1] + s * dir[1], base[2] + s * dir[2]]
}

fn unit(a: Vec3) -> Result<Vec3> {
    let n = norm(a);
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::Validation("direction vector must be non-zero".into()));
    }
    Ok([a[0] / n, a[1] / n, a[2] / n])
}

/// Converts a loss in dB to a linear amplitude factor.
pub fn db_to_amplitude(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 20.0)
}

/// The six daily-life gestures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GestureLabel {
    #[serde(rename = "g1")]
    PickUpItem,
    #[serde(rename = "g2")]
    SitDown,
    #[serde(rename = "g3")]
    StandUp,
    #[serde(rename = "g4")]
    Fall,
    #[serde(rename = "g5")]
    StandAfterFall,
    #[serde(rename = "g6")]
    OutOfBed,
}

impl GestureLabel {
    pub const ALL: [GestureLabel; 6] = [
        GestureLabel::PickUpItem,
        GestureLabel::SitDown,
        GestureLabel::StandUp,
        GestureLabel::Fall,
        GestureLabel::StandAfterFall,
        GestureLabel::OutOfBed,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Short code, `g1` .. `g6`.
    pub fn code(self) -> &'static str {
        ["g1", "g2", "g3", "g4", "g5", "g6"][self.index()]
    }

    pub fn description(self) -> &'static str {
        match self {
            GestureLabel::PickUpItem => "pick up an item from the floor",
            GestureLabel::SitDown => "sit down on a chair",
            GestureLabel::StandUp => "stand up from sitting",
            GestureLabel::Fall => "fall down on the floor",
            GestureLabel::StandAfterFall => "stand up after a fall",
            GestureLabel::OutOfBed => "get up and out of bed",
        }
    }
}

impl std::fmt::Display for GestureLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

impl std::str::FromStr for GestureLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|g| g.code().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Validation(format!("unknown gesture label '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScattererKind {
    Static,
    Respiration,
    #[serde(untagged)]
    Gesture(GestureLabel),
}

/// Piecewise-linear scatterer trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScattererTrack {
    /// `[t, x, y, z]` keyframes, strictly increasing in `t`.
    pub keyframes: Vec<[f64; 4]>,
    /// Linear amplitude reflection coefficient.
    pub reflectivity: f64,
    #[serde(default = "default_kind")]
    pub label: ScattererKind,
}

fn default_kind() -> ScattererKind {
    ScattererKind::Static
}

impl ScattererTrack {
    pub fn new(keyframes: Vec<[f64; 4]>, reflectivity: f64, label: ScattererKind) -> Result<Self> {
        let track = Self {
            keyframes,
            reflectivity,
            label,
        };
        track.validate()?;
        Ok(track)
    }

    /// A scatterer that never moves.
    pub fn fixed(position: Vec3, reflectivity: f64) -> Self {
        Self {
            keyframes: vec![[0.0, position[0], position[1], position[2]]],
            reflectivity,
            label: ScattererKind::Static,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.keyframes.is_empty() {
            return Err(Error::Validation("track needs at least one keyframe".into()));
        }
        if self.keyframes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation("track keyframes must be finite".into()));
        }
        if self.keyframes.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(Error::Validation("keyframe times must be strictly increasing".into()));
        }
        if !self.reflectivity.is_finite() {
            return Err(Error::Validation("reflectivity must be finite".into()));
        }
        Ok(())
    }

    /// Time span covered by the keyframes; a single keyframe covers all time.
    pub fn span(&self) -> (f64, f64) {
        match self.keyframes.as_slice() {
            [_] => (f64::NEG_INFINITY, f64::INFINITY),
            kf => (kf[0][0], kf[kf.len() - 1][0]),
        }
    }

    pub fn covers(&self, t0: f64, t1: f64) -> bool {
        let (a, b) = self.span();
        t0 >= a - 1e-12 && t1 <= b + 1e-12
    }

    pub fn position(&self, t: f64) -> Result<Vec3> {
        let (a, b) = self.span();
        if !(t >= a - 1e-12 && t <= b + 1e-12) {
            return Err(Error::Range(format!("t = {t} s outside track span [{a}, {b}]")));
        }
        let kf = &self.keyframes;
        if kf.len() == 1 {
            return Ok([kf[0][1], kf[0][2], kf[0][3]]);
        }
        let i = kf.partition_point(|k| k[0] <= t).clamp(1, kf.len() - 1);
        Ok(interpolate(&kf[i - 1], &kf[i], t))
    }

    /// Appends a keyframe holding the last position until `t`.
    pub fn hold_until(mut self, t: f64) -> Self {
        let last = *self.keyframes.last().expect("validated track");
        if t > last[0] {
            self.keyframes.push([t, last[1], last[2], last[3]]);
        }
        self
    }
}

fn interpolate(a: &[f64; 4], b: &[f64; 4], t: f64) -> Vec3 {
    let w = ((t - a[0]) / (b[0] - a[0])).clamp(0.0, 1.0);
    [
        a[1] + w * (b[1] - a[1]),
        a[2] + w * (b[2] - a[2]),
        a[3] + w * (b[3] - a[3]),
    ]
}

/// Sequential position lookup for monotonically increasing query times.
struct TrackCursor<'a> {
    kf: &'a [[f64; 4]],
    i: usize,
}

impl<'a> TrackCursor<'a> {
    fn new(track: &'a ScattererTrack) -> Self {
        Self {
            kf: &track.keyframes,
            i: 1,
        }
    }

    fn at(&mut self, t: f64) -> Vec3 {
        if self.kf.len() == 1 {
            return [self.kf[0][1], self.kf[0][2], self.kf[0][3]];
        }
        while self.i < self.kf.len() - 1 && self.kf[self.i][0] <= t {
            self.i += 1;
        }
        interpolate(&self.kf[self.i - 1], &self.kf[self.i], t)
    }
}

fn default_wall_db() -> f64 {
    0.0
}

fn default_leakage_db() -> f64 {
    30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub tx_pos: Vec3,
    pub ref_rx_pos: Vec3,
    pub surv_rx_pos: Vec<Vec3>,
    #[serde(default)]
    pub scatterers: Vec<ScattererTrack>,
    /// One-way loss applied to every reflection, dB.
    #[serde(default = "default_wall_db")]
    pub wall_attenuation_db: f64,
    /// Loss of the direct path leaking into each surveillance channel, dB.
    #[serde(default = "default_leakage_db")]
    pub direct_leakage_db: f64,
    /// Variance of the complex white noise added to every channel.
    #[serde(default)]
    pub noise_power: f64,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if self.surv_rx_pos.is_empty() {
            return Err(Error::Validation("scene needs at least one surveillance receiver".into()));
        }
        let all_pos = std::iter::once(&self.tx_pos)
            .chain(std::iter::once(&self.ref_rx_pos))
            .chain(self.surv_rx_pos.iter());
        if all_pos.flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation("receiver and transmitter positions must be finite".into()));
        }
        if !(self.wall_attenuation_db >= 0.0 && self.direct_leakage_db >= 0.0) {
            return Err(Error::Validation("attenuations are losses and must be >= 0 dB".into()));
        }
        if !(self.noise_power >= 0.0 && self.noise_power.is_finite()) {
            return Err(Error::Validation("noise_power must be finite and >= 0".into()));
        }
        self.scatterers.iter().try_for_each(ScattererTrack::validate)
    }

    fn scatterer(&self, index: usize) -> Result<&ScattererTrack> {
        self.scatterers
            .get(index)
            .ok_or_else(|| Error::Range(format!("no scatterer {index}")))
    }

    fn surv(&self, index: usize) -> Result<Vec3> {
        self.surv_rx_pos
            .get(index)
            .copied()
            .ok_or_else(|| Error::Range(format!("no surveillance receiver {index}")))
    }

    /// Noise variance giving `snr_db` for a reflection of amplitude
    /// `reflectivity` through this scene's wall, with a unit-power transmitter.
    pub fn noise_power_for_snr(&self, reflectivity: f64, snr_db: f64) -> f64 {
        let amp = reflectivity * db_to_amplitude(self.wall_attenuation_db);
        amp * amp / 10f64.powf(snr_db / 10.0)
    }
}

/// Transmitter → scatterer → surveillance receiver path length at time `t`.
pub fn bistatic_range(scene: &Scene, scatterer: usize, surv: usize, t: f64) -> Result<f64> {
    let p = scene.scatterer(scatterer)?.position(t)?;
    let rx = scene.surv(surv)?;
    Ok(dist(scene.tx_pos, p) + dist(p, rx))
}

/// Step used for the central difference in [`instantaneous_doppler`].
pub const DOPPLER_FD_STEP_S: f64 = 1e-4;

/// Bistatic Doppler shift `-(1/λ) dR/dt` by central finite difference.
pub fn instantaneous_doppler(scene: &Scene, scatterer: usize, surv: usize, t: f64, wavelength_m: f64) -> Result<f64> {
    if !(wavelength_m > 0.0) {
        return Err(Error::Validation("wavelength must be > 0".into()));
    }
    let h = DOPPLER_FD_STEP_S;
    let (a, b) = scene.scatterer(scatterer)?.span();
    if t - h < a || t + h > b {
        return Err(Error::Range(format!(
            "t = {t} s is not interior to the track span [{a}, {b}]"
        )));
    }
    let r_plus = bistatic_range(scene, scatterer, surv, t + h)?;
    let r_minus = bistatic_range(scene, scatterer, surv, t - h)?;
    Ok(-(r_plus - r_minus) / (2.0 * h) / wavelength_m)
}

/// Output of [`apply_scene`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelOutput {
    pub reference: IqTrace,
    pub surveillance: Vec<IqTrace>,
}

fn delayed(tx: &[C64], n: usize, delay: usize) -> C64 {
    if n >= delay {
        tx[n - delay]
    } else {
        C64::new(0.0, 0.0)
    }
}

fn add_noise(samples: &mut [C64], power: f64, seed: u64, stream: u64) {
    if power <= 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let normal = Normal::new(0.0, (power / 2.0).sqrt()).expect("finite sigma");
    for s in samples {
        *s += C64::new(normal.sample(&mut rng), normal.sample(&mut rng));
    }
}

/// Propagates `tx` through `scene`, producing reference and surveillance channels.
///
/// Noise on channel `c` (0 = reference) is drawn from stream `c` of a
/// ChaCha8 generator seeded with `seed`.
pub fn apply_scene(tx: &IqTrace, scene: &Scene, seed: u64) -> Result<ChannelOutput> {
    scene.validate()?;
    let (t_first, t_last) = (tx.t0_s, tx.time_of(tx.len() - 1));
    for (i, s) in scene.scatterers.iter().enumerate() {
        if !s.covers(t_first, t_last) {
            let (a, b) = s.span();
            return Err(Error::Range(format!(
                "signal span [{t_first}, {t_last}] s exceeds scatterer {i} span [{a}, {b}]"
            )));
        }
    }
    let lambda = tx.wavelength_m();
    let fs = tx.sample_rate_hz;
    let k = 2.0 * PI / lambda;
    let delay_samples = |range_m: f64| (range_m / SPEED_OF_LIGHT * fs).round() as usize;

    let direct = |rx: Vec3, gain: f64| -> Vec<C64> {
        let d = dist(scene.tx_pos, rx);
        let delay = delay_samples(d);
        let g = C64::from_polar(gain, -k * d);
        (0..tx.len()).map(|n| g * delayed(&tx.samples, n, delay)).collect()
    };

    let mut reference = direct(scene.ref_rx_pos, 1.0);
    add_noise(&mut reference, scene.noise_power, seed, 0);

    let wall = db_to_amplitude(scene.wall_attenuation_db);
    let leak = db_to_amplitude(scene.direct_leakage_db);
    let surveillance = scene
        .surv_rx_pos
        .par_iter()
        .enumerate()
        .map(|(c, &rx)| {
            let mut out = direct(rx, leak);
            for track in &scene.scatterers {
                let amp = track.reflectivity * wall;
                let mut cursor = TrackCursor::new(track);
                for (n, y) in out.iter_mut().enumerate() {
                    let p = cursor.at(tx.time_of(n));
                    let r = dist(scene.tx_pos, p) + dist(p, rx);
                    *y += C64::from_polar(amp, -k * r) * delayed(&tx.samples, n, delay_samples(r));
                }
            }
            add_noise(&mut out, scene.noise_power, seed, c as u64 + 1);
            IqTrace::new(out, fs, tx.carrier_hz, tx.t0_s)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ChannelOutput {
        reference: IqTrace::new(reference, fs, tx.carrier_hz, tx.t0_s)?,
        surveillance,
    })
}

/// One constant-velocity piece of a gesture template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionSegment {
    pub duration_s: f64,
    /// Speed along the motion axis, m/s; positive moves away from the sensors.
    pub speed_mps: f64,
}

const fn seg(duration_s: f64, speed_mps: f64) -> MotionSegment {
    MotionSegment { duration_s, speed_mps }
}

/// Nominal (un-jittered) motion template for a gesture.
///
/// Positive speed moves the torso along the motion axis away from the
/// sensors, lengthening the bistatic range and giving negative Doppler.
pub fn gesture_template(label: GestureLabel) -> Vec<MotionSegment> {
    match label {
        // lean over, pause to pick, straighten up
        GestureLabel::PickUpItem => vec![seg(1.2, 0.6), seg(0.6, 0.0), seg(1.2, -0.6)],
        GestureLabel::SitDown => vec![seg(0.5, 0.3), seg(0.7, 0.7), seg(0.3, 0.2)],
        GestureLabel::StandUp => vec![seg(0.3, -0.2), seg(0.7, -0.7), seg(0.5, -0.3)],
        GestureLabel::Fall => vec![seg(0.2, 0.8), seg(0.5, 1.8), seg(0.1, 0.5)],
        GestureLabel::StandAfterFall => vec![seg(0.8, -0.2), seg(1.2, -0.45), seg(0.5, -0.2)],
        // roll towards the bed edge, brief settle, rise
        GestureLabel::OutOfBed => vec![seg(1.0, 0.25), seg(0.2, 0.0), seg(1.0, -0.7), seg(0.8, -0.3)],
    }
}

/// Kinematic parameters shared by generated gesture tracks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureKinematics {
    /// Direction pointing away from the sensors.
    pub motion_axis: Vec3,
    pub reflectivity: f64,
    /// Half-width of the uniform jitter on overall duration and speed.
    pub global_jitter: f64,
    /// Half-width of the uniform jitter applied per segment.
    pub segment_jitter: f64,
}

impl Default for GestureKinematics {
    fn default() -> Self {
        Self {
            motion_axis: [1.0, 0.0, 0.0],
            reflectivity: 0.3,
            global_jitter: 0.15,
            segment_jitter: 0.1,
        }
    }
}

/// Builds a piecewise-linear track by chaining rests and gestures.
#[derive(Debug, Clone)]
pub struct TrackBuilder {
    keyframes: Vec<[f64; 4]>,
    axis: Vec3,
}

impl TrackBuilder {
    pub fn new(t0: f64, anchor: Vec3, motion_axis: Vec3) -> Result<Self> {
        Ok(Self {
            keyframes: vec![[t0, anchor[0], anchor[1], anchor[2]]],
            axis: unit(motion_axis)?,
        })
    }

    fn last(&self) -> [f64; 4] {
        *self.keyframes.last().expect("builder starts with a keyframe")
    }

    fn push_move(&mut self, duration_s: f64, speed: f64) {
        let l = self.last();
        let p = axpy([l[1], l[2], l[3]], self.axis, speed * duration_s);
        self.keyframes.push([l[0] + duration_s, p[0], p[1], p[2]]);
    }

    pub fn end_time(&self) -> f64 {
        self.last()[0]
    }

    pub fn rest_until(mut self, t: f64) -> Self {
        if t > self.end_time() {
            self.push_move(t - self.end_time(), 0.0);
        }
        self
    }

    /// Appends a jittered instance of `label`'s template.
    pub fn gesture(mut self, label: GestureLabel, kin: &GestureKinematics, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let jitter = |rng: &mut ChaCha8Rng, w: f64| {
            if w > 0.0 {
                Uniform::new_inclusive(1.0 - w, 1.0 + w).sample(rng)
            } else {
                1.0
            }
        };
        let time_scale = jitter(&mut rng, kin.global_jitter);
        let speed_scale = jitter(&mut rng, kin.global_jitter);
        for s in gesture_template(label) {
            let d = s.duration_s * time_scale * jitter(&mut rng, kin.segment_jitter);
            let v = s.speed_mps * speed_scale * jitter(&mut rng, kin.segment_jitter);
            self.push_move(d, v);
        }
        self
    }

    pub fn build(self, reflectivity: f64, label: ScattererKind) -> Result<ScattererTrack> {
        ScattererTrack::new(self.keyframes, reflectivity, label)
    }
}

/// Keyframed track of one gesture starting at `start_s`, resting at `anchor` before it.
pub fn gesture_track(label: GestureLabel, start_s: f64, anchor: Vec3, rng_seed: u64) -> Result<ScattererTrack> {
    gesture_track_with(label, start_s, anchor, rng_seed, &GestureKinematics::default())
}

pub fn gesture_track_with(
    label: GestureLabel,
    start_s: f64,
    anchor: Vec3,
    rng_seed: u64,
    kin: &GestureKinematics,
) -> Result<ScattererTrack> {
    let t0 = start_s.min(0.0);
    TrackBuilder::new(t0, anchor, kin.motion_axis)?
        .rest_until(start_s)
        .gesture(label, kin, rng_seed)
        .build(kin.reflectivity, ScattererKind::Gesture(label))
}

/// Sinusoidal chest-wall motion along the transmitter → anchor line over `[0, span_s]`.
pub fn respiration_track(rate_hz: f64, amplitude_m: f64, anchor: Vec3, span_s: f64, tx_pos: Vec3) -> Result<ScattererTrack> {
    respiration_track_along(rate_hz, amplitude_m, anchor, span_s, sub(anchor, tx_pos))
}

/// Sinusoidal chest-wall motion along an explicit direction.
pub fn respiration_track_along(rate_hz: f64, amplitude_m: f64, anchor: Vec3, span_s: f64, direction: Vec3) -> Result<ScattererTrack> {
    if !(amplitude_m > 0.0 && amplitude_m <= 0.05) {
        return Err(Error::Validation(format!(
            "respiration amplitude must lie in (0, 0.05] m, got {amplitude_m}"
        )));
    }
    if !(rate_hz > 0.05 && rate_hz < 1.0) {
        return Err(Error::Validation(format!(
            "respiration rate must lie in (0.05, 1.0) Hz, got {rate_hz}"
        )));
    }
    if !(span_s > 0.0 && span_s.is_finite()) {
        return Err(Error::Validation("respiration span must be > 0".into()));
    }
    let dir = unit(direction)?;
    let step = (1.0 / rate_hz / 80.0).min(0.02);
    let n = (span_s / step).ceil() as usize;
    let keyframes = (0..=n)
        .map(|i| {
            let t = (i as f64 * step).min(span_s);
            let p = axpy(anchor, dir, amplitude_m * (2.0 * PI * rate_hz * t).sin());
            [t, p[0], p[1], p[2]]
        })
        .collect::<Vec<_>>();
    ScattererTrack::new(dedup_times(keyframes), 1.0, ScattererKind::Respiration)
}

fn dedup_times(mut kf: Vec<[f64; 4]>) -> Vec<[f64; 4]> {
    kf.dedup_by(|b, a| b[0] <= a[0]);
    kf
}
