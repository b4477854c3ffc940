use serde::{Deserialize, Serialize};

use crate::doppler::DopplerSpectrogram;
use crate::{Error, Result};

/// Default resampled window height (time rows).
pub const WINDOW_ROWS: usize = 32;
/// Default resampled window width (Doppler columns).
pub const WINDOW_COLS: usize = 41;

/// A gesture-cycle slice of a spectrogram, resampled to a fixed grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureWindow {
    pub start_s: f64,
    pub end_s: f64,
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows × cols` linear power.
    pub slice: Vec<f64>,
    /// Columns span `[-max_doppler_hz, +max_doppler_hz]` evenly.
    pub max_doppler_hz: f64,
}

impl GestureWindow {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.slice[row * self.cols + col]
    }

    /// Doppler frequency of column `col`.
    pub fn column_hz(&self, col: usize) -> f64 {
        if self.cols == 1 {
            return 0.0;
        }
        -self.max_doppler_hz + 2.0 * self.max_doppler_hz * col as f64 / (self.cols - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    /// Fraction of the trace-maximum off-zero energy that marks activity.
    pub threshold: f64,
    pub min_len_s: f64,
    pub min_gap_s: f64,
    /// Half-width of the zero-Doppler band ignored when measuring activity.
    pub exclude_hz: f64,
    pub rows: usize,
    pub cols: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            threshold: 0.1,
            min_len_s: 0.5,
            min_gap_s: 0.75,
            exclude_hz: 1.0,
            rows: WINDOW_ROWS,
            cols: WINDOW_COLS,
        }
    }
}

/// Bilinear resampling of a row-major `rows × cols` grid with corners aligned.
pub fn resample_bilinear(src: &[f64], rows: usize, cols: usize, out_rows: usize, out_cols: usize) -> Vec<f64> {
    let coord = |i: usize, n_out: usize, n_in: usize| -> (usize, usize, f64) {
        if n_in == 1 || n_out == 1 {
            return (0, 0, 0.0);
        }
        let x = i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
        let lo = (x.floor() as usize).min(n_in - 1);
        let hi = (lo + 1).min(n_in - 1);
        (lo, hi, x - lo as f64)
    };
    let mut out = Vec::with_capacity(out_rows * out_cols);
    for r in 0..out_rows {
        let (r0, r1, wr) = coord(r, out_rows, rows);
        for c in 0..out_cols {
            let (c0, c1, wc) = coord(c, out_cols, cols);
            let top = src[r0 * cols + c0] * (1.0 - wc) + src[r0 * cols + c1] * wc;
            let bottom = src[r1 * cols + c0] * (1.0 - wc) + src[r1 * cols + c1] * wc;
            out.push(top * (1.0 - wr) + bottom * wr);
        }
    }
    out
}

fn batch_span(spec: &DopplerSpectrogram) -> f64 {
    let hop = spec.hop_s();
    if hop > 0.0 {
        hop
    } else {
        1.0 / spec.resolution_hz
    }
}

/// Window covering batches `first..=last`, resampled to `rows × cols`.
pub fn window_from_batches(spec: &DopplerSpectrogram, first: usize, last: usize, rows: usize, cols: usize) -> Result<GestureWindow> {
    if spec.is_empty() {
        return Err(Error::Shape("empty spectrogram".into()));
    }
    if first > last || last >= spec.n_batches() {
        return Err(Error::Range(format!("batch range {first}..={last} outside spectrogram")));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::Shape("window grid must be non-empty".into()));
    }
    let n_rows = last - first + 1;
    let flat: Vec<f64> = spec.magnitudes[first..=last].iter().flatten().copied().collect();
    let half = batch_span(spec) / 2.0;
    Ok(GestureWindow {
        start_s: spec.batch_times_s[first] - half,
        end_s: spec.batch_times_s[last] + half,
        rows,
        cols,
        slice: resample_bilinear(&flat, n_rows, spec.n_bins(), rows, cols),
        max_doppler_hz: spec.max_doppler_hz(),
    })
}

/// Batch-index runs `(first, last)` that pass the activity rule of [`segment`].
pub fn active_runs(spec: &DopplerSpectrogram, config: &SegmentConfig) -> Result<Vec<(usize, usize)>> {
    if spec.is_empty() {
        return Err(Error::Shape("cannot segment an empty spectrogram".into()));
    }
    if !(config.threshold > 0.0 && config.threshold < 1.0) {
        return Err(Error::Validation(format!(
            "threshold must lie in (0, 1), got {}",
            config.threshold
        )));
    }
    let energy = spec.off_zero_energy(config.exclude_hz);
    let peak = energy.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Ok(Vec::new());
    }
    let level = config.threshold * peak;
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut open: Option<usize> = None;
    for (b, e) in energy.iter().enumerate() {
        match (*e >= level, open) {
            (true, None) => open = Some(b),
            (false, Some(s)) => {
                runs.push((s, b - 1));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        runs.push((s, energy.len() - 1));
    }

    let hop = batch_span(spec);
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for run in runs {
        match merged.last_mut() {
            Some(prev) if ((run.0 - prev.1 - 1) as f64) * hop < config.min_gap_s => prev.1 = run.1,
            _ => merged.push(run),
        }
    }
    Ok(merged
        .into_iter()
        .filter(|(a, b)| (b - a + 1) as f64 * hop + 1e-9 >= config.min_len_s)
        .collect())
}

/// Cuts gesture windows out of a spectrogram.
///
/// Batches whose off-zero energy reaches `threshold · max` are active;
/// active runs closer than `min_gap_s` are merged, then runs shorter than
/// `min_len_s` are dropped.
pub fn segment(spec: &DopplerSpectrogram, config: &SegmentConfig) -> Result<Vec<GestureWindow>> {
    active_runs(spec, config)?
        .into_iter()
        .map(|(a, b)| window_from_batches(spec, a, b, config.rows, config.cols))
        .collect()
}

/// Element-wise sum of spectrograms sharing one batch/Doppler grid.
pub fn combine_spectrograms(specs: &[DopplerSpectrogram]) -> Result<DopplerSpectrogram> {
    let first = specs.first().ok_or_else(|| Error::Shape("no spectrograms given".into()))?;
    if specs
        .iter()
        .any(|s| s.batch_times_s != first.batch_times_s || s.doppler_axis_hz != first.doppler_axis_hz)
    {
        return Err(Error::Shape("spectrograms must share batch times and Doppler axis".into()));
    }
    let mut sum = first.clone();
    for s in &specs[1..] {
        for (row, other) in sum.magnitudes.iter_mut().zip(&s.magnitudes) {
            row.iter_mut().zip(other).for_each(|(a, b)| *a += b);
        }
    }
    Ok(sum)
}

/// Concatenates same-width windows along the time axis (receiver after receiver).
pub fn stack_windows(windows: &[GestureWindow]) -> Result<GestureWindow> {
    let first = windows.first().ok_or_else(|| Error::Shape("no windows to stack".into()))?;
    if windows
        .iter()
        .any(|w| w.cols != first.cols || w.max_doppler_hz != first.max_doppler_hz)
    {
        return Err(Error::Shape("stacked windows must share the Doppler grid".into()));
    }
    Ok(GestureWindow {
        start_s: first.start_s,
        end_s: first.end_s,
        rows: windows.iter().map(|w| w.rows).sum(),
        cols: first.cols,
        slice: windows.iter().flat_map(|w| w.slice.iter().copied()).collect(),
        max_doppler_hz: first.max_doppler_hz,
    })
}

fn stacked_window(specs: &[DopplerSpectrogram], first: usize, last: usize, config: &SegmentConfig) -> Result<GestureWindow> {
    let parts = specs
        .iter()
        .map(|s| window_from_batches(s, first, last, config.rows, config.cols))
        .collect::<Result<Vec<_>>>()?;
    stack_windows(&parts)
}

/// Segments simultaneous spectrograms from several receivers.
///
/// Activity is measured on their sum; each window stacks the per-receiver
/// slices of the same batch range.
pub fn segment_multi(specs: &[DopplerSpectrogram], config: &SegmentConfig) -> Result<Vec<GestureWindow>> {
    let combined = combine_spectrograms(specs)?;
    active_runs(&combined, config)?
        .into_iter()
        .map(|(a, b)| stacked_window(specs, a, b, config))
        .collect()
}

/// Single window spanning every active run of a recording known to hold
/// one gesture; `None` when nothing is active.
pub fn recording_window(specs: &[DopplerSpectrogram], config: &SegmentConfig) -> Result<Option<GestureWindow>> {
    let combined = combine_spectrograms(specs)?;
    let runs = active_runs(&combined, config)?;
    match (runs.first(), runs.last()) {
        (Some(a), Some(b)) => stacked_window(specs, a.0, b.1, config).map(Some),
        _ => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(active: &[usize], n: usize) -> DopplerSpectrogram {
        let axis: Vec<f64> = (-5..=5).map(|k| k as f64 * 2.0).collect();
        let rows = (0..n)
            .map(|b| {
                let mut row = vec![0.0; axis.len()];
                row[5] = 50.0;
                if active.contains(&b) {
                    row[8] = 4.0;
                }
                row
            })
            .collect();
        let times = (0..n).map(|b| 0.25 + 0.25 * b as f64).collect();
        DopplerSpectrogram::new(rows, times, axis, 2.0).unwrap()
    }

    #[test]
    fn silence_gives_no_windows() {
        let spec = grid(&[], 20);
        assert!(segment(&spec, &SegmentConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn single_burst_one_window() {
        let spec = grid(&(5..13).collect::<Vec<_>>(), 30);
        let w = segment(&spec, &SegmentConfig::default()).unwrap();
        assert_eq!(w.len(), 1);
        assert!((w[0].start_s - (1.5 - 0.125)).abs() < 1e-12);
        assert!((w[0].end_s - (3.25 + 0.125)).abs() < 1e-12);
        assert_eq!(w[0].slice.len(), WINDOW_ROWS * WINDOW_COLS);
    }

    #[test]
    fn gap_rule_splits_or_merges() {
        // 4 inactive batches = 1.0 s gap
        let active: Vec<usize> = (2..8).chain(12..18).collect();
        let spec = grid(&active, 25);
        let cfg = SegmentConfig::default();
        let split = segment(&spec, &cfg).unwrap();
        assert_eq!(split.len(), 2);
        assert!(split[0].end_s <= split[1].start_s);
        let cfg = SegmentConfig {
            min_gap_s: 1.5,
            ..cfg
        };
        let merged = segment(&spec, &cfg).unwrap();
        assert_eq!(merged.len(), 1);
        assert!((merged[0].end_s - split[1].end_s).abs() < 1e-12);
    }

    #[test]
    fn short_runs_are_dropped() {
        let spec = grid(&[4, 15, 16, 17, 18], 25);
        let w = segment(&spec, &SegmentConfig::default()).unwrap();
        assert_eq!(w.len(), 1);
        assert!((w[0].start_s - 3.875).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let empty = DopplerSpectrogram::new(vec![], vec![], vec![0.0], 2.0).unwrap();
        assert!(matches!(segment(&empty, &SegmentConfig::default()), Err(Error::Shape(_))));
        let cfg = SegmentConfig {
            threshold: 1.0,
            ..Default::default()
        };
        assert!(segment(&grid(&[1], 4), &cfg).is_err());
    }

    #[test]
    fn multi_receiver_windows_stack() {
        let a = grid(&(5..13).collect::<Vec<_>>(), 30);
        let b = grid(&[], 30);
        let w = segment_multi(&[a.clone(), b.clone()], &SegmentConfig::default()).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].rows, 2 * WINDOW_ROWS);
        let single = segment(&a, &SegmentConfig::default()).unwrap();
        assert_eq!(&w[0].slice[..WINDOW_ROWS * WINDOW_COLS], &single[0].slice[..]);
        let rec = recording_window(&[a, b], &SegmentConfig::default()).unwrap().unwrap();
        assert_eq!(rec, w[0]);
        assert!(recording_window(&[grid(&[], 10)], &SegmentConfig::default()).unwrap().is_none());
    }

    #[test]
    fn bilinear_keeps_corners_and_interpolates() {
        let src = vec![0.0, 1.0, 2.0, 3.0];
        let out = resample_bilinear(&src, 2, 2, 3, 3);
        assert_eq!(out, vec![0.0, 0.5, 1.0, 1.0, 1.5, 2.0, 2.0, 2.5, 3.0]);
        let single = resample_bilinear(&[7.0, 9.0], 1, 2, 2, 2);
        assert_eq!(single, vec![7.0, 9.0, 7.0, 9.0]);
    }
}
