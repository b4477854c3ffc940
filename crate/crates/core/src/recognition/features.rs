use serde::{Deserialize, Serialize};

use super::segment::GestureWindow;

/// Hand-crafted descriptors of a window's Doppler centroid curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveFeatures {
    /// Largest absolute centroid Doppler (Hz).
    pub peak_hz: f64,
    /// Window duration (s).
    pub span_s: f64,
    /// Least-squares slope of the centroid curve (Hz/s).
    pub slope_hz_per_s: f64,
    /// Sign changes of the centroid curve, ignoring rows within `dead_band_hz` of zero.
    pub zero_crossings: usize,
}

impl CurveFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.peak_hz, self.span_s, self.slope_hz_per_s, self.zero_crossings as f64]
    }
}

/// Power-weighted mean Doppler of each row, skipping columns with `|f| <= exclude_hz`.
pub fn centroid_curve(window: &GestureWindow, exclude_hz: f64) -> Vec<f64> {
    (0..window.rows)
        .map(|r| {
            let (mut num, mut den) = (0.0, 0.0);
            for c in 0..window.cols {
                let f = window.column_hz(c);
                if f.abs() > exclude_hz {
                    num += f * window.at(r, c);
                    den += window.at(r, c);
                }
            }
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        })
        .collect()
}

pub fn curve_features(window: &GestureWindow, exclude_hz: f64, dead_band_hz: f64) -> CurveFeatures {
    let curve = centroid_curve(window, exclude_hz);
    let span_s = window.end_s - window.start_s;
    let peak_hz = curve.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let n = curve.len();
    let dt = if n > 1 { span_s / (n - 1) as f64 } else { 0.0 };
    let slope_hz_per_s = if n > 1 && dt > 0.0 {
        let tm = (n - 1) as f64 * dt / 2.0;
        let fm = curve.iter().sum::<f64>() / n as f64;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (i, f) in curve.iter().enumerate() {
            let t = i as f64 * dt - tm;
            sxy += t * (f - fm);
            sxx += t * t;
        }
        sxy / sxx
    } else {
        0.0
    };
    let mut zero_crossings = 0;
    let mut last_sign = 0.0;
    for f in &curve {
        if f.abs() <= dead_band_hz {
            continue;
        }
        let s = f.signum();
        if last_sign != 0.0 && s != last_sign {
            zero_crossings += 1;
        }
        last_sign = s;
    }
    CurveFeatures {
        peak_hz,
        span_s,
        slope_hz_per_s,
        zero_crossings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window_with(col_per_row: &[usize]) -> GestureWindow {
        let cols = 11;
        let mut slice = vec![0.0; col_per_row.len() * cols];
        for (r, &c) in col_per_row.iter().enumerate() {
            slice[r * cols + c] = 1.0;
        }
        GestureWindow {
            start_s: 0.0,
            end_s: (col_per_row.len() - 1) as f64,
            rows: col_per_row.len(),
            cols,
            slice,
            max_doppler_hz: 10.0,
        }
    }

    #[test]
    fn sign_flip_curve() {
        // columns 2, 5 (zero), 8 -> -6 Hz, 0, +6 Hz
        let w = window_with(&[2, 2, 5, 8, 8]);
        let f = curve_features(&w, 1.0, 0.5);
        assert!((f.peak_hz - 6.0).abs() < 1e-12);
        assert_eq!(f.zero_crossings, 1);
        assert!(f.slope_hz_per_s > 0.0);
        assert_eq!(f.span_s, 4.0);
    }

    #[test]
    fn linear_ramp_slope() {
        let w = window_with(&[6, 7, 8, 9, 10]);
        let f = curve_features(&w, 1.0, 0.5);
        assert!((f.slope_hz_per_s - 2.0).abs() < 1e-12);
        assert_eq!(f.zero_crossings, 0);
    }
}
