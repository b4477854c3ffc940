//! Activity-level monitoring and label-sequence smoothing.
//!
//! Batch intensities from [`crate::doppler::doppler_envelope`] are averaged
//! into fixed epochs, binned into sedentary / moderate / vigorous minutes,
//! and classifier outputs are smoothed with a hidden Markov model whose
//! transition matrix encodes which activities may follow which.

use serde::{Deserialize, Serialize};

use crate::channel::GestureLabel;
use crate::{Error, Result};

/// Default sedentary/moderate boundary.
pub const DEFAULT_T1: f64 = 0.4;
/// Default moderate/vigorous boundary.
pub const DEFAULT_T2: f64 = 0.7;
/// Default softmax temperature for turning SRC residuals into emissions.
pub const DEFAULT_BETA: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    pub t_start_s: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityTrace {
    pub epoch_len_s: f64,
    pub epochs: Vec<Epoch>,
}

impl IntensityTrace {
    pub fn new(epoch_len_s: f64, epochs: Vec<Epoch>) -> Result<Self> {
        if !(epoch_len_s > 0.0 && epoch_len_s.is_finite()) {
            return Err(Error::Validation(format!("epoch length must be > 0, got {epoch_len_s}")));
        }
        if let Some(e) = epochs.iter().find(|e| !(0.0..=1.0).contains(&e.intensity)) {
            return Err(Error::Validation(format!(
                "intensity {} at t = {} s outside [0, 1]",
                e.intensity, e.t_start_s
            )));
        }
        for w in epochs.windows(2) {
            if (w[1].t_start_s - w[0].t_start_s - epoch_len_s).abs() > 1e-6 * epoch_len_s.max(1.0) {
                return Err(Error::Validation(format!(
                    "epochs at {} s and {} s are not contiguous",
                    w[0].t_start_s, w[1].t_start_s
                )));
            }
        }
        Ok(Self { epoch_len_s, epochs })
    }

    /// Builds a contiguous trace starting at `t0_s` from bare intensities.
    pub fn from_intensities(t0_s: f64, epoch_len_s: f64, intensities: &[f64]) -> Result<Self> {
        let epochs = intensities
            .iter()
            .enumerate()
            .map(|(i, &v)| Epoch {
                t_start_s: t0_s + i as f64 * epoch_len_s,
                intensity: v,
            })
            .collect();
        Self::new(epoch_len_s, epochs)
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.epochs.len() as f64 * self.epoch_len_s
    }
}

/// Averages `(time, intensity)` batch samples into epochs of `epoch_len_s`
/// starting at `t0_s`. Epochs that receive no batch are reported as 0.
pub fn intensity_epochs(batches: &[(f64, f64)], t0_s: f64, epoch_len_s: f64) -> Result<IntensityTrace> {
    if batches.is_empty() {
        return Err(Error::Validation("no batch intensities to aggregate".into()));
    }
    if !(epoch_len_s > 0.0) {
        return Err(Error::Validation(format!("epoch length must be > 0, got {epoch_len_s}")));
    }
    if let Some((t, _)) = batches.iter().find(|(t, _)| *t < t0_s) {
        return Err(Error::Range(format!("batch at {t} s precedes the first epoch at {t0_s} s")));
    }
    let last = batches.iter().map(|(t, _)| *t).fold(f64::MIN, f64::max);
    let n = ((last - t0_s) / epoch_len_s).floor() as usize + 1;
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for (t, v) in batches {
        let i = (((t - t0_s) / epoch_len_s).floor() as usize).min(n - 1);
        sum[i] += v.clamp(0.0, 1.0);
        count[i] += 1;
    }
    let intensities: Vec<f64> = sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    IntensityTrace::from_intensities(t0_s, epoch_len_s, &intensities)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivityLevel {
    Sedentary,
    Moderate,
    Vigorous,
}

/// Half-open binning: `[0, t1)` sedentary, `[t1, t2)` moderate, `[t2, 1]` vigorous.
pub fn activity_level(intensity: f64, t1: f64, t2: f64) -> ActivityLevel {
    if intensity < t1 {
        ActivityLevel::Sedentary
    } else if intensity < t2 {
        ActivityLevel::Moderate
    } else {
        ActivityLevel::Vigorous
    }
}

/// Minutes per activity level over one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivitySummary {
    pub sedentary_min: f64,
    pub moderate_min: f64,
    pub vigorous_min: f64,
    pub total_min: f64,
    /// Moderate plus vigorous minutes.
    pub total_active_min: f64,
    /// Length of the longest uninterrupted sedentary stretch (taken as sleep).
    pub longest_sedentary_run_min: f64,
    pub sedentary_excluding_sleep_min: f64,
    pub total_excluding_sleep_min: f64,
    pub thresholds: [f64; 2],
    pub epoch_len_s: f64,
}

pub fn summarize(trace: &IntensityTrace, t1: f64, t2: f64) -> Result<ActivitySummary> {
    if trace.is_empty() {
        return Err(Error::Validation("cannot summarize an empty intensity trace".into()));
    }
    if !(0.0 < t1 && t1 < t2 && t2 < 1.0) {
        return Err(Error::Validation(format!("thresholds must satisfy 0 < t1 < t2 < 1, got ({t1}, {t2})")));
    }
    let (mut sed, mut modr, mut vig) = (0usize, 0usize, 0usize);
    let (mut run, mut longest) = (0usize, 0usize);
    for e in &trace.epochs {
        match activity_level(e.intensity, t1, t2) {
            ActivityLevel::Sedentary => {
                sed += 1;
                run += 1;
                longest = longest.max(run);
            }
            ActivityLevel::Moderate => {
                modr += 1;
                run = 0;
            }
            ActivityLevel::Vigorous => {
                vig += 1;
                run = 0;
            }
        }
    }
    let minutes = |n: usize| n as f64 * trace.epoch_len_s / 60.0;
    let total = trace.epochs.len();
    Ok(ActivitySummary {
        sedentary_min: minutes(sed),
        moderate_min: minutes(modr),
        vigorous_min: minutes(vig),
        total_min: minutes(total),
        total_active_min: minutes(modr + vig),
        longest_sedentary_run_min: minutes(longest),
        sedentary_excluding_sleep_min: minutes(sed - longest),
        total_excluding_sleep_min: minutes(total - longest),
        thresholds: [t1, t2],
        epoch_len_s: trace.epoch_len_s,
    })
}

/// Row-stochastic HMM transition matrix over named states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    pub states: Vec<String>,
    pub probabilities: Vec<Vec<f64>>,
    pub forbidden: Vec<(usize, usize)>,
}

impl TransitionModel {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn is_forbidden(&self, from: usize, to: usize) -> bool {
        self.probabilities[from][to] == 0.0
    }
}

/// Normalizes prior `counts` row by row after zeroing `forbidden` pairs.
pub fn build_transitions(states: &[String], counts: &[Vec<f64>], forbidden: &[(usize, usize)]) -> Result<TransitionModel> {
    let n = states.len();
    if n == 0 {
        return Err(Error::Validation("transition model needs at least one state".into()));
    }
    if counts.len() != n || counts.iter().any(|r| r.len() != n) {
        return Err(Error::Shape(format!("counts must be {n}x{n}")));
    }
    if counts.iter().flatten().any(|c| !(*c >= 0.0 && c.is_finite())) {
        return Err(Error::Validation("transition counts must be finite and >= 0".into()));
    }
    if let Some((a, b)) = forbidden.iter().find(|(a, b)| *a >= n || *b >= n) {
        return Err(Error::Validation(format!("forbidden pair ({a}, {b}) references an unknown state")));
    }
    let mut probabilities = counts.to_vec();
    for &(a, b) in forbidden {
        probabilities[a][b] = 0.0;
    }
    for (i, row) in probabilities.iter_mut().enumerate() {
        let total: f64 = row.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Validation(format!(
                "every successor of state '{}' is forbidden or has zero count",
                states[i]
            )));
        }
        row.iter_mut().for_each(|p| *p /= total);
    }
    let mut forbidden = forbidden.to_vec();
    forbidden.sort_unstable();
    forbidden.dedup();
    Ok(TransitionModel {
        states: states.to_vec(),
        probabilities,
        forbidden,
    })
}

/// Name of the extra no-gesture state.
pub const IDLE: &str = "idle";

/// States of the default activity model: the six gestures, then idle.
pub fn activity_states() -> Vec<String> {
    GestureLabel::ALL
        .iter()
        .map(|g| g.code().to_string())
        .chain(std::iter::once(IDLE.to_string()))
        .collect()
}

/// Default daily-life transition model.
///
/// Sitting down cannot be followed directly by getting out of bed, and
/// standing up after a fall can only follow a fall, idle or itself.
pub fn default_transition_model() -> TransitionModel {
    let states = activity_states();
    let idle = states.len() - 1;
    let counts: Vec<Vec<f64>> = (0..states.len())
        .map(|i| {
            (0..states.len())
                .map(|j| match (i == j, i == idle || j == idle) {
                    (true, _) => 4.0,
                    (false, true) => 3.0,
                    (false, false) => 1.0,
                })
                .collect()
        })
        .collect();
    let g = |l: GestureLabel| l.index();
    use GestureLabel::*;
    let forbidden = [
        (g(SitDown), g(OutOfBed)),
        (g(PickUpItem), g(StandAfterFall)),
        (g(SitDown), g(StandAfterFall)),
        (g(StandUp), g(StandAfterFall)),
        (g(OutOfBed), g(StandAfterFall)),
    ];
    build_transitions(&states, &counts, &forbidden).expect("default transition model is valid")
}

fn ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Most probable state path for log-likelihood `emissions[frame][state]`.
///
/// Ties are resolved toward the lower state index, both when choosing a
/// predecessor and when choosing the final state.
pub fn viterbi(emissions: &[Vec<f64>], model: &TransitionModel, initial: &[f64]) -> Result<Vec<usize>> {
    let n = model.n_states();
    if initial.len() != n {
        return Err(Error::Shape(format!("initial distribution has {} entries, expected {n}", initial.len())));
    }
    if initial.iter().any(|p| !(*p >= 0.0)) || (initial.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Validation("initial distribution must be non-negative and sum to 1".into()));
    }
    if let Some(i) = emissions.iter().position(|f| f.len() != n) {
        return Err(Error::Shape(format!("frame {i} has {} emissions, expected {n}", emissions[i].len())));
    }
    if let Some(i) = emissions.iter().position(|f| f.iter().any(|v| v.is_nan() || *v == f64::INFINITY)) {
        return Err(Error::Validation(format!("frame {i} has NaN or +inf emissions")));
    }
    if let Some(i) = emissions.iter().position(|f| f.iter().all(|v| *v == f64::NEG_INFINITY)) {
        return Err(Error::Validation(format!("frame {i} has no state with finite emission likelihood")));
    }
    if emissions.is_empty() {
        return Ok(Vec::new());
    }
    let log_a: Vec<Vec<f64>> = model.probabilities.iter().map(|r| r.iter().map(|p| ln(*p)).collect()).collect();
    let mut score: Vec<f64> = (0..n).map(|s| ln(initial[s]) + emissions[0][s]).collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(emissions.len());
    for frame in &emissions[1..] {
        let mut next = vec![f64::NEG_INFINITY; n];
        let mut ptr = vec![0usize; n];
        for (j, (nx, pt)) in next.iter_mut().zip(ptr.iter_mut()).enumerate() {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (i, s) in score.iter().enumerate() {
                let v = s + log_a[i][j];
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            *nx = best + frame[j];
            *pt = arg;
        }
        score = next;
        back.push(ptr);
    }
    let (mut state, best) = score
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(a, b), (i, &v)| if v > b { (i, v) } else { (a, b) });
    if best == f64::NEG_INFINITY {
        return Err(Error::Validation("no state path has non-zero probability".into()));
    }
    let mut path = vec![state; emissions.len()];
    for (t, ptr) in back.iter().enumerate().rev() {
        state = ptr[state];
        path[t] = state;
    }
    Ok(path)
}

/// Log-softmax of `-beta · residuals`.
pub fn src_to_emission(residuals: &[f64], beta: f64) -> Vec<f64> {
    let scaled: Vec<f64> = residuals.iter().map(|r| -beta * r).collect();
    let m = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + scaled.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
    scaled.iter().map(|s| s - lse).collect()
}

/// A labelled time span, as written to label JSON lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub label: String,
    pub smoothed: bool,
}

/// A classifier decision to be smoothed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredFrame {
    pub t_start_s: f64,
    pub t_end_s: f64,
    /// Per-gesture SRC residuals, `g1` first.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoothConfig {
    pub beta: f64,
    /// Gaps between consecutive frames longer than this insert an idle frame.
    pub idle_gap_s: f64,
}

impl Default for SmoothConfig {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            idle_gap_s: 5.0,
        }
    }
}

/// Smooths per-detection residuals with the default activity model.
///
/// Returns one record per input frame; idle frames used to bridge long
/// gaps are not reported.
pub fn smooth_detections(frames: &[ScoredFrame], config: &SmoothConfig) -> Result<Vec<LabelRecord>> {
    let model = default_transition_model();
    let n = model.n_states();
    let idle = n - 1;
    let mut emissions = Vec::new();
    let mut keep = Vec::new();
    for (i, f) in frames.iter().enumerate() {
        if f.residuals.len() != GestureLabel::ALL.len() {
            return Err(Error::Shape(format!(
                "frame {i} has {} residuals, expected {}",
                f.residuals.len(),
                GestureLabel::ALL.len()
            )));
        }
        if f.residuals.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::Validation(format!("frame {i} residuals must be finite and >= 0")));
        }
        if i > 0 && f.t_start_s - frames[i - 1].t_end_s > config.idle_gap_s {
            let mut e = vec![f64::NEG_INFINITY; n];
            e[idle] = 0.0;
            emissions.push(e);
            keep.push(false);
        }
        let mut e = src_to_emission(&f.residuals, config.beta);
        e.push(f64::NEG_INFINITY);
        emissions.push(e);
        keep.push(true);
    }
    let initial = vec![1.0 / n as f64; n];
    let path = viterbi(&emissions, &model, &initial)?;
    Ok(path
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(s, _)| *s)
        .zip(frames)
        .map(|(s, f)| LabelRecord {
            t_start_s: f.t_start_s,
            t_end_s: f.t_end_s,
            label: model.states[s].clone(),
            smoothed: true,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn daily_summary_round_trip() {
        // 30 s epochs: 540 min asleep, 122.5 min other sedentary, 156.5 moderate, 83 vigorous
        let mut v = Vec::new();
        v.extend(std::iter::repeat(0.05).take(1080));
        v.extend(std::iter::repeat(0.8).take(166));
        v.extend(std::iter::repeat(0.5).take(313));
        v.extend(std::iter::repeat(0.2).take(245));
        let trace = IntensityTrace::from_intensities(0.0, 30.0, &v).unwrap();
        let s = summarize(&trace, DEFAULT_T1, DEFAULT_T2).unwrap();
        assert_eq!(s.sedentary_min, 662.5);
        assert_eq!(s.moderate_min, 156.5);
        assert_eq!(s.vigorous_min, 83.0);
        assert_eq!(s.total_min, 902.0);
        assert_eq!(s.sedentary_excluding_sleep_min, 122.5);
        assert_eq!(s.total_excluding_sleep_min, 362.0);
    }

    #[test]
    fn boundaries_are_half_open() {
        let trace = IntensityTrace::from_intensities(0.0, 60.0, &[0.0, 0.4, 0.7, 1.0]).unwrap();
        let s = summarize(&trace, 0.4, 0.7).unwrap();
        assert_eq!((s.sedentary_min, s.moderate_min, s.vigorous_min), (1.0, 1.0, 2.0));
        let zero = IntensityTrace::from_intensities(0.0, 60.0, &[0.0; 5]).unwrap();
        assert_eq!(summarize(&zero, 0.4, 0.7).unwrap().sedentary_min, 5.0);
    }

    #[test]
    fn summarize_validation() {
        let empty = IntensityTrace::new(60.0, vec![]).unwrap();
        assert!(summarize(&empty, 0.4, 0.7).is_err());
        let t = IntensityTrace::from_intensities(0.0, 60.0, &[0.1]).unwrap();
        assert!(summarize(&t, 0.7, 0.4).is_err());
        assert!(IntensityTrace::from_intensities(0.0, 60.0, &[1.2]).is_err());
    }

    #[test]
    fn epoch_means() {
        let batches = [(0.25, 0.2), (0.75, 0.4), (1.25, 1.0), (3.5, 0.6)];
        let t = intensity_epochs(&batches, 0.0, 1.0).unwrap();
        let v: Vec<f64> = t.epochs.iter().map(|e| e.intensity).collect();
        assert_eq!(v.len(), 4);
        assert!((v[0] - 0.3).abs() < 1e-12);
        assert_eq!(&v[1..], &[1.0, 0.0, 0.6]);
    }

    #[test]
    fn transition_examples() {
        let m = build_transitions(&names(3), &vec![vec![1.0; 3]; 3], &[]).unwrap();
        assert!(m.probabilities.iter().flatten().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
        let m = build_transitions(&names(3), &[vec![2.0, 1.0, 1.0], vec![1.0; 3], vec![1.0; 3]], &[]).unwrap();
        assert_eq!(m.probabilities[0], vec![0.5, 0.25, 0.25]);
        let m = build_transitions(&names(3), &vec![vec![1.0; 3]; 3], &[(0, 2)]).unwrap();
        assert_eq!(m.probabilities[0], vec![0.5, 0.5, 0.0]);
        assert!(build_transitions(&names(2), &vec![vec![1.0; 2]; 2], &[(0, 0), (0, 1)]).is_err());
        assert!(build_transitions(&names(2), &vec![vec![1.0; 2]; 2], &[(0, 5)]).is_err());
    }

    #[test]
    fn default_model_forbids_sit_to_bed_exit() {
        let m = default_transition_model();
        let sit = m.state_index("g2").unwrap();
        let bed = m.state_index("g6").unwrap();
        assert_eq!(m.probabilities[sit][bed], 0.0);
        for row in &m.probabilities {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_transitions_give_framewise_argmax() {
        let m = build_transitions(&names(3), &vec![vec![1.0; 3]; 3], &[]).unwrap();
        let e = vec![vec![0.0, -1.0, -2.0], vec![-3.0, -0.5, -1.0], vec![-2.0, -2.0, -0.1]];
        assert_eq!(viterbi(&e, &m, &[1.0 / 3.0; 3]).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn forbidden_transition_is_avoided() {
        let m = build_transitions(&names(3), &vec![vec![1.0; 3]; 3], &[(0, 1)]).unwrap();
        let e = vec![vec![0.0, -50.0, -50.0], vec![-60.0, 0.0, -40.0]];
        let path = viterbi(&e, &m, &[1.0 / 3.0; 3]).unwrap();
        assert!(!(path[0] == 0 && path[1] == 1));
    }

    fn brute_force(e: &[Vec<f64>], m: &TransitionModel, init: &[f64]) -> (Vec<usize>, f64) {
        let n = m.n_states();
        let frames = e.len();
        let mut best = (vec![], f64::NEG_INFINITY);
        for code in 0..n.pow(frames as u32) {
            let path: Vec<usize> = (0..frames).map(|t| code / n.pow(t as u32) % n).collect();
            let mut s = ln(init[path[0]]) + e[0][path[0]];
            for t in 1..frames {
                s += ln(m.probabilities[path[t - 1]][path[t]]) + e[t][path[t]];
            }
            if s > best.1 {
                best = (path, s);
            }
        }
        best
    }

    fn path_score(p: &[usize], e: &[Vec<f64>], m: &TransitionModel, init: &[f64]) -> f64 {
        let mut s = ln(init[p[0]]) + e[0][p[0]];
        for t in 1..p.len() {
            s += ln(m.probabilities[p[t - 1]][p[t]]) + e[t][p[t]];
        }
        s
    }

    #[test]
    fn hand_set_three_by_three_matches_enumeration() {
        let m = build_transitions(
            &names(3),
            &[vec![5.0, 1.0, 1.0], vec![1.0, 5.0, 2.0], vec![2.0, 1.0, 5.0]],
            &[(2, 1)],
        )
        .unwrap();
        let e = vec![vec![-0.2, -1.5, -2.5], vec![-2.0, -0.3, -1.0], vec![-1.2, -0.9, -0.4]];
        let init = [0.5, 0.3, 0.2];
        let v = viterbi(&e, &m, &init).unwrap();
        let (bf, s) = brute_force(&e, &m, &init);
        assert!((path_score(&v, &e, &m, &init) - s).abs() < 1e-12);
        assert_eq!(v, bf);
    }

    #[test]
    fn random_small_instances_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let n = rng.gen_range(1..=4);
            let frames = rng.gen_range(1..=5);
            let counts: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(0.1..3.0)).collect()).collect();
            let forbidden: Vec<(usize, usize)> = (0..n).filter(|_| n > 1 && rng.gen_bool(0.5)).map(|i| (i, (i + 1) % n)).collect();
            let m = build_transitions(&names(n), &counts, &forbidden).unwrap();
            let e: Vec<Vec<f64>> = (0..frames).map(|_| (0..n).map(|_| rng.gen_range(-4.0..0.0)).collect()).collect();
            let init = vec![1.0 / n as f64; n];
            let v = viterbi(&e, &m, &init).unwrap();
            let (_, s) = brute_force(&e, &m, &init);
            assert!((path_score(&v, &e, &m, &init) - s).abs() < 1e-9);
        }
    }

    #[test]
    fn all_impossible_frame_is_rejected() {
        let m = build_transitions(&names(2), &vec![vec![1.0; 2]; 2], &[]).unwrap();
        let e = vec![vec![0.0, 0.0], vec![f64::NEG_INFINITY; 2]];
        assert!(matches!(viterbi(&e, &m, &[0.5, 0.5]), Err(Error::Validation(_))));
        assert!(viterbi(&[vec![0.0; 2]], &m, &[0.7, 0.7]).is_err());
    }

    #[test]
    fn emission_softmax() {
        let e = src_to_emission(&[0.3, 0.3, 0.3], 5.0);
        assert!(e.iter().all(|v| (v - e[0]).abs() < 1e-15));
        let e = src_to_emission(&[0.0, 1.0], 5.0);
        assert!((e[0].exp() - 0.993307).abs() < 1e-6);
        assert!((e[1].exp() - 0.006693).abs() < 1e-6);
        let s: f64 = src_to_emission(&[0.1, 2.0, 0.7, 1.3], 5.0).iter().map(|v| v.exp()).sum();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn detection_smoothing_respects_constraints() {
        // second frame looks like g6 right after a confident g2
        let mut r1 = vec![1.0; 6];
        r1[1] = 0.0;
        let mut r2 = vec![1.0; 6];
        r2[5] = 0.55;
        r2[0] = 0.6;
        let frames = vec![
            ScoredFrame { t_start_s: 0.0, t_end_s: 2.0, residuals: r1 },
            ScoredFrame { t_start_s: 2.5, t_end_s: 4.0, residuals: r2 },
        ];
        let out = smooth_detections(&frames, &SmoothConfig::default()).unwrap();
        assert_eq!(out[0].label, "g2");
        assert_ne!(out[1].label, "g6");
    }
}
