//! File formats used by the command line tool.
//!
//! * `.iq`: little-endian `f32` interleaved I/Q with a `<file>.meta`
//!   sidecar of `key=value` lines (`sample_rate_hz`, `carrier_hz`, `t0_s`,
//!   `n_samples`).
//! * Spectrogram CSV: the first row holds `time_s` followed by the Doppler
//!   axis; every further row is a batch time followed by its magnitudes.
//! * Intensity CSV: `t_start_s,intensity` per epoch.
//! * JSON documents and JSON lines for models, summaries and labels.
//!
//! Every write goes to a temporary file that is renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::doppler::DopplerSpectrogram;
use crate::monitor::{Epoch, IntensityTrace};
use crate::waveform::IqTrace;
use crate::{Error, Result, C64};

/// Writes `bytes` to `path` via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|_| Error::format(path, "not valid UTF-8"))
}

/// Tracks files written by one command so they can be removed if the
/// command fails part-way.
#[derive(Debug, Default)]
pub struct OutputSet {
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes)?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    pub fn write_iq(&mut self, path: &Path, trace: &IqTrace) -> Result<()> {
        let (data, meta) = encode_iq(trace);
        self.write(path, &data)?;
        self.write(&meta_path(path), meta.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, path: &Path, value: &T) -> Result<()> {
        self.write(path, json_bytes(value)?.as_slice())
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.written
    }

    /// Keeps everything written so far.
    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}

pub fn meta_path(iq_path: &Path) -> PathBuf {
    let mut s = iq_path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn encode_iq(trace: &IqTrace) -> (Vec<u8>, String) {
    let mut data = Vec::with_capacity(trace.len() * 8);
    for s in &trace.samples {
        data.extend_from_slice(&(s.re as f32).to_le_bytes());
        data.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    let meta = format!(
        "sample_rate_hz={}\ncarrier_hz={}\nt0_s={}\nn_samples={}\n",
        trace.sample_rate_hz,
        trace.carrier_hz,
        trace.t0_s,
        trace.len()
    );
    (data, meta)
}

pub fn write_iq(path: &Path, trace: &IqTrace) -> Result<()> {
    let (data, meta) = encode_iq(trace);
    write_atomic(path, &data)?;
    write_atomic(&meta_path(path), meta.as_bytes())
}

pub fn read_iq(path: &Path) -> Result<IqTrace> {
    let mpath = meta_path(path);
    let meta = read_text(&mpath)?;
    let mut fields = std::collections::BTreeMap::new();
    for (no, line) in meta.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(&mpath, format!("line {}: expected key=value", no + 1)))?;
        fields.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| -> Result<f64> {
        fields
            .get(k)
            .ok_or_else(|| Error::format(&mpath, format!("missing '{k}'")))?
            .parse::<f64>()
            .map_err(|_| Error::format(&mpath, format!("'{k}' is not a number")))
    };
    let fs_hz = get("sample_rate_hz")?;
    let carrier = get("carrier_hz")?;
    let t0 = if fields.contains_key("t0_s") { get("t0_s")? } else { 0.0 };
    let bytes = read_bytes(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::format(path, format!("{} bytes is not a whole number of f32 I/Q pairs", bytes.len())));
    }
    let samples: Vec<C64> = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            C64::new(re as f64, im as f64)
        })
        .collect();
    if let Some(n) = fields.get("n_samples") {
        let n: usize = n.parse().map_err(|_| Error::format(&mpath, "'n_samples' is not an integer"))?;
        if n != samples.len() {
            return Err(Error::format(path, format!("meta declares {n} samples, file holds {}", samples.len())));
        }
    }
    if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
        return Err(Error::format(path, "non-finite sample"));
    }
    IqTrace::new(samples, fs_hz, carrier, t0).map_err(|e| Error::format(path, e.to_string()))
}

pub fn spectrogram_csv(spec: &DopplerSpectrogram) -> String {
    let mut out = String::from("time_s");
    for f in &spec.doppler_axis_hz {
        let _ = write!(out, ",{f}");
    }
    out.push('\n');
    for (t, row) in spec.batch_times_s.iter().zip(&spec.magnitudes) {
        let _ = write!(out, "{t}");
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_spectrogram_csv(path: &Path, spec: &DopplerSpectrogram) -> Result<()> {
    write_atomic(path, spectrogram_csv(spec).as_bytes())
}

fn parse_row(path: &Path, line_no: usize, line: &str) -> Result<Vec<f64>> {
    line.split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|_| Error::format(path, format!("line {line_no}: '{}' is not a number", c.trim())))
        })
        .collect()
}

pub fn read_spectrogram_csv(path: &Path) -> Result<DopplerSpectrogram> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::format(path, "empty file"))?;
    let mut cells = header.split(',');
    if cells.next().map(str::trim) != Some("time_s") {
        return Err(Error::format(path, "header must start with 'time_s'"));
    }
    let axis: Vec<f64> = parse_row(path, 1, &cells.collect::<Vec<_>>().join(","))?;
    if axis.len() < 2 {
        return Err(Error::format(path, "need at least two Doppler bins"));
    }
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in lines {
        let v = parse_row(path, i + 1, line)?;
        if v.len() != axis.len() + 1 {
            return Err(Error::format(
                path,
                format!("line {}: expected {} columns, found {}", i + 1, axis.len() + 1, v.len()),
            ));
        }
        times.push(v[0]);
        rows.push(v[1..].to_vec());
    }
    let resolution = (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64;
    DopplerSpectrogram::new(rows, times, axis, resolution).map_err(|e| Error::format(path, e.to_string()))
}

/// 8-bit greyscale PGM (P5) of a spectrogram in dB: time runs left to
/// right, positive Doppler at the top, 60 dB below the peak maps to black.
pub fn spectrogram_pgm(spec: &DopplerSpectrogram) -> Vec<u8> {
    let (w, h) = (spec.n_batches(), spec.n_bins());
    let peak = spec.magnitudes.iter().flatten().cloned().fold(0.0, f64::max);
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    for bin in (0..h).rev() {
        for b in 0..w {
            let v = spec.magnitudes[b][bin];
            let db = if peak > 0.0 && v > 0.0 { 10.0 * (v / peak).log10() } else { -60.0 };
            out.push((((db.max(-60.0) + 60.0) / 60.0) * 255.0).round() as u8);
        }
    }
    out
}

pub fn intensity_csv(trace: &IntensityTrace) -> String {
    let mut out = String::from("t_start_s,intensity\n");
    for e in &trace.epochs {
        let _ = writeln!(out, "{},{}", e.t_start_s, e.intensity);
    }
    out
}

/// Reads an intensity CSV. The epoch length is taken from the row spacing,
/// or from `epoch_len_s` when the file has a single row.
pub fn read_intensity_csv(path: &Path, epoch_len_s: Option<f64>) -> Result<IntensityTrace> {
    let text = read_text(path)?;
    let mut epochs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("t_start_s")) {
            continue;
        }
        let v = parse_row(path, i + 1, line)?;
        if v.len() != 2 {
            return Err(Error::format(path, format!("line {}: expected 2 columns", i + 1)));
        }
        epochs.push(Epoch {
            t_start_s: v[0],
            intensity: v[1],
        });
    }
    let len = match (epochs.len(), epoch_len_s) {
        (_, Some(l)) => l,
        (n, None) if n >= 2 => epochs[1].t_start_s - epochs[0].t_start_s,
        _ => return Err(Error::format(path, "cannot infer the epoch length from fewer than two rows")),
    };
    IntensityTrace::new(len, epochs).map_err(|e| Error::format(path, e.to_string()))
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| Error::Numerical(format!("serialization failed: {e}")))?;
    v.push(b'\n');
    Ok(v)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &json_bytes(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn json_lines<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).map_err(|e| Error::Numerical(format!("serialization failed: {e}")))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_json_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::format(path, format!("line {}: {e}", i + 1))))
        .collect()
}
