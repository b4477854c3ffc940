//! C ABI over the `wisense` sensing pipeline.
//!
//! Every fallible call returns a [`WsStatus`]; on failure a message is kept
//! per thread and can be copied out with [`ws_last_error_message`]. Complex
//! sample buffers are interleaved `re, im` doubles. Objects that outlive a
//! call (spectrograms, gesture models, detection lists) are opaque handles
//! released by their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use wisense::channel::GestureLabel;
use wisense::doppler::{caf_batch, CafConfig, DopplerSpectrogram};
use wisense::io;
use wisense::monitor::{build_transitions, summarize, viterbi, IntensityTrace};
use wisense::recognition::{Detection, GestureModel};
use wisense::respiration::{analyze, phase_sensitivity, RespirationConfig};
use wisense::waveform::IqTrace;
use wisense::{Error, C64};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WsStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Shape = 3,
    Range = 4,
    Validation = 5,
    DivisionByZero = 6,
    NoDetection = 7,
    Numerical = 8,
    Format = 9,
    Io = 10,
    InvalidUtf8 = 11,
    Panic = 12,
}

impl From<&Error> for WsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) => WsStatus::Config,
            Error::Shape(_) => WsStatus::Shape,
            Error::Range(_) => WsStatus::Range,
            Error::Validation(_) => WsStatus::Validation,
            Error::DivisionByZero(_) => WsStatus::DivisionByZero,
            Error::NoDetection(_) => WsStatus::NoDetection,
            Error::Numerical(_) => WsStatus::Numerical,
            Error::Format { .. } => WsStatus::Format,
            Error::Io { .. } => WsStatus::Io,
        }
    }
}

/// Opaque Doppler spectrogram.
pub struct WsSpectrogram(DopplerSpectrogram);

/// Opaque trained gesture model.
pub struct WsModel(GestureModel);

/// Opaque list of classified gestures.
pub struct WsDetections(Vec<Detection>);

/// Cross-ambiguity batching parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct WsCafConfig {
    pub batch_len_s: f64,
    pub batch_hop_s: f64,
    pub max_doppler_hz: f64,
    /// Doppler grid spacing; zero or negative selects `1 / batch_len_s`.
    pub doppler_step_hz: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct WsRespiration {
    pub rate_hz: f64,
    pub rate_bpm: f64,
    pub peak_to_peak_rad: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct WsActivitySummary {
    pub sedentary_min: f64,
    pub moderate_min: f64,
    pub vigorous_min: f64,
    pub total_min: f64,
    pub total_active_min: f64,
    pub longest_sedentary_run_min: f64,
    pub sedentary_excluding_sleep_min: f64,
    pub total_excluding_sleep_min: f64,
}

/// Number of gesture classes, and of residuals per detection.
pub const WS_GESTURE_CLASSES: usize = 6;

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct WsDetection {
    pub start_s: f64,
    pub end_s: f64,
    /// Gesture class index, 0 for g1 through 5 for g6.
    pub label: u32,
    pub residuals: [f64; WS_GESTURE_CLASSES],
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(WsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(WsStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(WsStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WsStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            WsStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn out<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or_else(|| null(what))
}

unsafe fn path<'a>(ptr: *const c_char) -> Result<&'a Path, Failure> {
    if ptr.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map(Path::new)
        .map_err(|_| Failure(WsStatus::InvalidUtf8, "path is not valid UTF-8".into()))
}

unsafe fn iq(ptr: *const f64, n_samples: usize, sample_rate_hz: f64, carrier_hz: f64, what: &str) -> Result<IqTrace, Failure> {
    let flat = slice(ptr, 2 * n_samples, what)?;
    let samples = flat.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect();
    Ok(IqTrace::new(samples, sample_rate_hz, carrier_hz, 0.0)?)
}

unsafe fn copy_out(src: &[f64], dst: *mut f64, capacity: usize) -> Result<(), Failure> {
    if capacity < src.len() {
        return Err(Failure(
            WsStatus::Shape,
            format!("output buffer holds {capacity} values, {} needed", src.len()),
        ));
    }
    if !src.is_empty() {
        if dst.is_null() {
            return Err(null("output buffer"));
        }
        std::ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    }
    Ok(())
}

/// Library version as a NUL-terminated static string.
#[no_mangle]
pub extern "C" fn ws_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => c"",
    };
    VERSION.as_ptr()
}

/// Copies the calling thread's last error message into `buf`.
///
/// Returns the message length including the terminating NUL; when that is
/// larger than `len` the message is truncated. Returns 0 when no error has
/// been recorded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ws_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Short code ("g1" .. "g6") of gesture class `index`, or null when out of range.
#[no_mangle]
pub extern "C" fn ws_gesture_code(index: u32) -> *const c_char {
    const CODES: [&CStr; WS_GESTURE_CLASSES] = [c"g1", c"g2", c"g3", c"g4", c"g5", c"g6"];
    CODES.get(index as usize).map_or(std::ptr::null(), |c| c.as_ptr())
}

/// Phase change in radians produced by a chest displacement.
///
/// # Safety
/// `out_rad` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn ws_phase_sensitivity(displacement_m: f64, wavelength_m: f64, out_rad: *mut f64) -> WsStatus {
    guard(|| {
        let o = out(out_rad, "out_rad")?;
        *o = phase_sensitivity(displacement_m, wavelength_m)?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn ws_caf_config_default() -> WsCafConfig {
    let d = CafConfig::default();
    WsCafConfig {
        batch_len_s: d.batch_len_s,
        batch_hop_s: d.batch_hop_s,
        max_doppler_hz: d.max_doppler_hz,
        doppler_step_hz: 0.0,
    }
}

/// Zero-delay cross-ambiguity spectrogram of a reference/surveillance pair.
///
/// # Safety
/// `reference` and `surveillance` must each hold `2 * n_samples` doubles;
/// `config` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ws_caf(
    reference: *const f64,
    surveillance: *const f64,
    n_samples: usize,
    sample_rate_hz: f64,
    carrier_hz: f64,
    config: *const WsCafConfig,
    out_spectrogram: *mut *mut WsSpectrogram,
) -> WsStatus {
    guard(|| {
        let o = out(out_spectrogram, "out_spectrogram")?;
        *o = std::ptr::null_mut();
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        let r = iq(reference, n_samples, sample_rate_hz, carrier_hz, "reference")?;
        let s = iq(surveillance, n_samples, sample_rate_hz, carrier_hz, "surveillance")?;
        let cfg = CafConfig {
            batch_len_s: c.batch_len_s,
            batch_hop_s: c.batch_hop_s,
            max_doppler_hz: c.max_doppler_hz,
            doppler_step_hz: (c.doppler_step_hz > 0.0).then_some(c.doppler_step_hz),
            ..CafConfig::default()
        };
        let spec = caf_batch(&r, &s, &cfg)?;
        *o = Box::into_raw(Box::new(WsSpectrogram(spec)));
        Ok(())
    })
}

/// Reads a spectrogram CSV as written by the command line tool.
///
/// # Safety
/// `csv_path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_spectrogram_read_csv(csv_path: *const c_char, out_spectrogram: *mut *mut WsSpectrogram) -> WsStatus {
    guard(|| {
        let o = out(out_spectrogram, "out_spectrogram")?;
        *o = std::ptr::null_mut();
        let spec = io::read_spectrogram_csv(path(csv_path)?)?;
        *o = Box::into_raw(Box::new(WsSpectrogram(spec)));
        Ok(())
    })
}

/// # Safety
/// `spec` must be null or a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ws_spectrogram_free(spec: *mut WsSpectrogram) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// # Safety
/// `spec` must be null or a live spectrogram handle.
#[no_mangle]
pub unsafe extern "C" fn ws_spectrogram_n_batches(spec: *const WsSpectrogram) -> usize {
    spec.as_ref().map_or(0, |s| s.0.n_batches())
}

/// # Safety
/// `spec` must be null or a live spectrogram handle.
#[no_mangle]
pub unsafe extern "C" fn ws_spectrogram_n_bins(spec: *const WsSpectrogram) -> usize {
    spec.as_ref().map_or(0, |s| s.0.n_bins())
}

/// Doppler resolution in Hz, or 0 for a null handle.
///
/// # Safety
/// `spec` must be null or a live spectrogram handle.
#[no_mangle]
pub unsafe extern "C" fn ws_spectrogram_resolution_hz(spec: *const WsSpectrogram) -> f64 {
    spec.as_ref().map_or(0.0, |s| s.0.resolution_hz)
}

/// Copies the batch-major `n_batches × n_bins` power matrix.
///
/// # Safety
/// `spec` must be a live handle; `dst` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn ws_spectrogram_copy_power(spec: *const WsSpectrogram, dst: *mut f64, capacity: usize) -> WsStatus {
    guard(|| {
        let s = spec.as_ref().ok_or_else(|| null("spectrogram"))?;
        let flat: Vec<f64> = s.0.magnitudes.iter().flatten().copied().collect();
        copy_out(&flat, dst, capacity)
    })
}

/// Copies the `n_bins` Doppler axis values in Hz.
///
/// # Safety
/// `spec` must be a live handle; `dst` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn ws_spectrogram_copy_doppler_axis(spec: *const WsSpectrogram, dst: *mut f64, capacity: usize) -> WsStatus {
    guard(|| {
        let s = spec.as_ref().ok_or_else(|| null("spectrogram"))?;
        copy_out(&s.0.doppler_axis_hz, dst, capacity)
    })
}

/// Copies the `n_batches` batch centre times in seconds.
///
/// # Safety
/// `spec` must be a live handle; `dst` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn ws_spectrogram_copy_times(spec: *const WsSpectrogram, dst: *mut f64, capacity: usize) -> WsStatus {
    guard(|| {
        let s = spec.as_ref().ok_or_else(|| null("spectrogram"))?;
        copy_out(&s.0.batch_times_s, dst, capacity)
    })
}

/// Breathing rate from a reference/surveillance pair with default
/// respiration settings (0.1 s epochs, Hampel 11/3, 0.1 to 0.5 Hz band).
///
/// # Safety
/// `reference` and `surveillance` must each hold `2 * n_samples` doubles;
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_respiration(
    reference: *const f64,
    surveillance: *const f64,
    n_samples: usize,
    sample_rate_hz: f64,
    carrier_hz: f64,
    out_estimate: *mut WsRespiration,
) -> WsStatus {
    guard(|| {
        let o = out(out_estimate, "out_estimate")?;
        let r = iq(reference, n_samples, sample_rate_hz, carrier_hz, "reference")?;
        let s = iq(surveillance, n_samples, sample_rate_hz, carrier_hz, "surveillance")?;
        let e = analyze(&r, &s, &RespirationConfig::default())?.estimate;
        *o = WsRespiration {
            rate_hz: e.rate_hz,
            rate_bpm: e.rate_bpm,
            peak_to_peak_rad: e.peak_to_peak_rad,
        };
        Ok(())
    })
}

/// Activity minutes for consecutive epochs of normalized intensity.
///
/// # Safety
/// `intensities` must hold `n_epochs` doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_summarize(
    intensities: *const f64,
    n_epochs: usize,
    epoch_len_s: f64,
    t1: f64,
    t2: f64,
    out_summary: *mut WsActivitySummary,
) -> WsStatus {
    guard(|| {
        let o = out(out_summary, "out_summary")?;
        let values = slice(intensities, n_epochs, "intensities")?;
        let trace = IntensityTrace::from_intensities(0.0, epoch_len_s, values)?;
        let s = summarize(&trace, t1, t2)?;
        *o = WsActivitySummary {
            sedentary_min: s.sedentary_min,
            moderate_min: s.moderate_min,
            vigorous_min: s.vigorous_min,
            total_min: s.total_min,
            total_active_min: s.total_active_min,
            longest_sedentary_run_min: s.longest_sedentary_run_min,
            sedentary_excluding_sleep_min: s.sedentary_excluding_sleep_min,
            total_excluding_sleep_min: s.total_excluding_sleep_min,
        };
        Ok(())
    })
}

/// Most probable state path.
///
/// `log_emissions` is frame-major `n_frames × n_states`; `transition_weights`
/// is a row-major `n_states × n_states` matrix of non-negative weights,
/// normalized per row, where zero marks a forbidden transition; `initial`
/// holds `n_states` probabilities summing to one. Writes `n_frames` state
/// indices to `out_path`.
///
/// # Safety
/// All pointers must reference buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn ws_viterbi(
    log_emissions: *const f64,
    n_frames: usize,
    n_states: usize,
    transition_weights: *const f64,
    initial: *const f64,
    out_path: *mut u32,
) -> WsStatus {
    guard(|| {
        let em = slice(log_emissions, n_frames * n_states, "log_emissions")?;
        let tw = slice(transition_weights, n_states * n_states, "transition_weights")?;
        let init = slice(initial, n_states, "initial")?;
        if n_states == 0 {
            return Err(Failure(WsStatus::Validation, "n_states must be >= 1".into()));
        }
        let states: Vec<String> = (0..n_states).map(|i| format!("s{i}")).collect();
        let counts: Vec<Vec<f64>> = tw.chunks_exact(n_states).map(<[f64]>::to_vec).collect();
        let model = build_transitions(&states, &counts, &[])?;
        let frames: Vec<Vec<f64>> = em.chunks_exact(n_states).map(<[f64]>::to_vec).collect();
        let path = viterbi(&frames, &model, init)?;
        if n_frames > 0 && out_path.is_null() {
            return Err(null("out_path"));
        }
        for (i, s) in path.iter().enumerate() {
            *out_path.add(i) = *s as u32;
        }
        Ok(())
    })
}

/// Loads a gesture model saved as JSON by the command line tool.
///
/// # Safety
/// `json_path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_model_load(json_path: *const c_char, out_model: *mut *mut WsModel) -> WsStatus {
    guard(|| {
        let o = out(out_model, "out_model")?;
        *o = std::ptr::null_mut();
        let model: GestureModel = io::read_json(path(json_path)?)?;
        *o = Box::into_raw(Box::new(WsModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ws_model_free(model: *mut WsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Segments and classifies gestures in one spectrogram per receiver.
///
/// # Safety
/// `model` must be a live handle; `specs` must hold `n_specs` live
/// spectrogram handles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_model_classify(
    model: *const WsModel,
    specs: *const *const WsSpectrogram,
    n_specs: usize,
    out_detections: *mut *mut WsDetections,
) -> WsStatus {
    guard(|| {
        let o = out(out_detections, "out_detections")?;
        *o = std::ptr::null_mut();
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let handles = slice(specs, n_specs, "specs")?;
        let spectrograms = handles
            .iter()
            .map(|h| h.as_ref().map(|s| s.0.clone()).ok_or_else(|| null("spectrogram handle")))
            .collect::<Result<Vec<_>, _>>()?;
        let detections = m.0.classify_spectrograms(&spectrograms)?;
        *o = Box::into_raw(Box::new(WsDetections(detections)));
        Ok(())
    })
}

/// # Safety
/// `detections` must be null or a live detection list.
#[no_mangle]
pub unsafe extern "C" fn ws_detections_len(detections: *const WsDetections) -> usize {
    detections.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `detections` must be a live detection list; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_detections_get(detections: *const WsDetections, index: usize, out_detection: *mut WsDetection) -> WsStatus {
    guard(|| {
        let o = out(out_detection, "out_detection")?;
        let d = detections.as_ref().ok_or_else(|| null("detections"))?;
        let det = d.0.get(index).ok_or_else(|| {
            Failure(WsStatus::Range, format!("detection index {index} out of range (len {})", d.0.len()))
        })?;
        let mut residuals = [0.0; WS_GESTURE_CLASSES];
        for (r, v) in residuals.iter_mut().zip(&det.residuals) {
            *r = *v;
        }
        *o = WsDetection {
            start_s: det.start_s,
            end_s: det.end_s,
            label: GestureLabel::index(det.label) as u32,
            residuals,
        };
        Ok(())
    })
}

/// # Safety
/// `detections` must be null or a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ws_detections_free(detections: *mut WsDetections) {
    if !detections.is_null() {
        drop(Box::from_raw(detections));
    }
}
