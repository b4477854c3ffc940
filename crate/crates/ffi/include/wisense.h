#ifndef WISENSE_H
#define WISENSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Number of gesture classes, and of residuals per detection.
 */
#define WS_GESTURE_CLASSES 6

/**
 * Result code of every fallible call.
 */
typedef enum {
  WS_STATUS_OK = 0,
  WS_STATUS_NULL_POINTER = 1,
  WS_STATUS_CONFIG = 2,
  WS_STATUS_SHAPE = 3,
  WS_STATUS_RANGE = 4,
  WS_STATUS_VALIDATION = 5,
  WS_STATUS_DIVISION_BY_ZERO = 6,
  WS_STATUS_NO_DETECTION = 7,
  WS_STATUS_NUMERICAL = 8,
  WS_STATUS_FORMAT = 9,
  WS_STATUS_IO = 10,
  WS_STATUS_INVALID_UTF8 = 11,
  WS_STATUS_PANIC = 12,
} WsStatus;

/**
 * Opaque list of classified gestures.
 */
typedef struct WsDetections WsDetections;

/**
 * Opaque trained gesture model.
 */
typedef struct WsModel WsModel;

/**
 * Opaque Doppler spectrogram.
 */
typedef struct WsSpectrogram WsSpectrogram;

/**
 * Cross-ambiguity batching parameters.
 */
typedef struct {
  double batch_len_s;
  double batch_hop_s;
  double max_doppler_hz;
  /**
   * Doppler grid spacing; zero or negative selects `1 / batch_len_s`.
   */
  double doppler_step_hz;
} WsCafConfig;

typedef struct {
  double rate_hz;
  double rate_bpm;
  double peak_to_peak_rad;
} WsRespiration;

typedef struct {
  double sedentary_min;
  double moderate_min;
  double vigorous_min;
  double total_min;
  double total_active_min;
  double longest_sedentary_run_min;
  double sedentary_excluding_sleep_min;
  double total_excluding_sleep_min;
} WsActivitySummary;

typedef struct {
  double start_s;
  double end_s;
  /**
   * Gesture class index, 0 for g1 through 5 for g6.
   */
  uint32_t label;
  double residuals[WS_GESTURE_CLASSES];
} WsDetection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a NUL-terminated static string.
 */
const char *ws_version(void);

/**
 * Copies the calling thread's last error message into `buf`.
 *
 * Returns the message length including the terminating NUL; when that is
 * larger than `len` the message is truncated. Returns 0 when no error has
 * been recorded.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t ws_last_error_message(char *buf, size_t len);

/**
 * Short code ("g1" .. "g6") of gesture class `index`, or null when out of range.
 */
const char *ws_gesture_code(uint32_t index);

/**
 * Phase change in radians produced by a chest displacement.
 *
 * # Safety
 * `out_rad` must be a valid pointer to a double.
 */
WsStatus ws_phase_sensitivity(double displacement_m, double wavelength_m, double *out_rad);

WsCafConfig ws_caf_config_default(void);

/**
 * Zero-delay cross-ambiguity spectrogram of a reference/surveillance pair.
 *
 * # Safety
 * `reference` and `surveillance` must each hold `2 * n_samples` doubles;
 * `config` and `out` must be valid pointers.
 */
WsStatus ws_caf(const double *reference,
                const double *surveillance,
                size_t n_samples,
                double sample_rate_hz,
                double carrier_hz,
                const WsCafConfig *config,
                WsSpectrogram **out_spectrogram);

/**
 * Reads a spectrogram CSV as written by the command line tool.
 *
 * # Safety
 * `csv_path` must be a NUL-terminated string; `out` a valid pointer.
 */
WsStatus ws_spectrogram_read_csv(const char *csv_path, WsSpectrogram **out_spectrogram);

/**
 * # Safety
 * `spec` must be null or a handle returned by this library, not yet freed.
 */
void ws_spectrogram_free(WsSpectrogram *spec);

/**
 * # Safety
 * `spec` must be null or a live spectrogram handle.
 */
size_t ws_spectrogram_n_batches(const WsSpectrogram *spec);

/**
 * # Safety
 * `spec` must be null or a live spectrogram handle.
 */
size_t ws_spectrogram_n_bins(const WsSpectrogram *spec);

/**
 * Doppler resolution in Hz, or 0 for a null handle.
 *
 * # Safety
 * `spec` must be null or a live spectrogram handle.
 */
double ws_spectrogram_resolution_hz(const WsSpectrogram *spec);

/**
 * Copies the batch-major `n_batches × n_bins` power matrix.
 *
 * # Safety
 * `spec` must be a live handle; `dst` must hold `capacity` doubles.
 */
WsStatus ws_spectrogram_copy_power(const WsSpectrogram *spec, double *dst, size_t capacity);

/**
 * Copies the `n_bins` Doppler axis values in Hz.
 *
 * # Safety
 * `spec` must be a live handle; `dst` must hold `capacity` doubles.
 */
WsStatus ws_spectrogram_copy_doppler_axis(const WsSpectrogram *spec, double *dst, size_t capacity);

/**
 * Copies the `n_batches` batch centre times in seconds.
 *
 * # Safety
 * `spec` must be a live handle; `dst` must hold `capacity` doubles.
 */
WsStatus ws_spectrogram_copy_times(const WsSpectrogram *spec, double *dst, size_t capacity);

/**
 * Breathing rate from a reference/surveillance pair with default
 * respiration settings (0.1 s epochs, Hampel 11/3, 0.1 to 0.5 Hz band).
 *
 * # Safety
 * `reference` and `surveillance` must each hold `2 * n_samples` doubles;
 * `out` must be a valid pointer.
 */
WsStatus ws_respiration(const double *reference,
                        const double *surveillance,
                        size_t n_samples,
                        double sample_rate_hz,
                        double carrier_hz,
                        WsRespiration *out_estimate);

/**
 * Activity minutes for consecutive epochs of normalized intensity.
 *
 * # Safety
 * `intensities` must hold `n_epochs` doubles; `out` must be a valid pointer.
 */
WsStatus ws_summarize(const double *intensities,
                      size_t n_epochs,
                      double epoch_len_s,
                      double t1,
                      double t2,
                      WsActivitySummary *out_summary);

/**
 * Most probable state path.
 *
 * `log_emissions` is frame-major `n_frames × n_states`; `transition_weights`
 * is a row-major `n_states × n_states` matrix of non-negative weights,
 * normalized per row, where zero marks a forbidden transition; `initial`
 * holds `n_states` probabilities summing to one. Writes `n_frames` state
 * indices to `out_path`.
 *
 * # Safety
 * All pointers must reference buffers of the stated sizes.
 */
WsStatus ws_viterbi(const double *log_emissions,
                    size_t n_frames,
                    size_t n_states,
                    const double *transition_weights,
                    const double *initial,
                    uint32_t *out_path);

/**
 * Loads a gesture model saved as JSON by the command line tool.
 *
 * # Safety
 * `json_path` must be a NUL-terminated string; `out` a valid pointer.
 */
WsStatus ws_model_load(const char *json_path, WsModel **out_model);

/**
 * # Safety
 * `model` must be null or a handle returned by this library, not yet freed.
 */
void ws_model_free(WsModel *model);

/**
 * Segments and classifies gestures in one spectrogram per receiver.
 *
 * # Safety
 * `model` must be a live handle; `specs` must hold `n_specs` live
 * spectrogram handles; `out` must be a valid pointer.
 */
WsStatus ws_model_classify(const WsModel *model,
                           const WsSpectrogram *const *specs,
                           size_t n_specs,
                           WsDetections **out_detections);

/**
 * # Safety
 * `detections` must be null or a live detection list.
 */
size_t ws_detections_len(const WsDetections *detections);

/**
 * # Safety
 * `detections` must be a live detection list; `out` a valid pointer.
 */
WsStatus ws_detections_get(const WsDetections *detections,
                           size_t index,
                           WsDetection *out_detection);

/**
 * # Safety
 * `detections` must be null or a handle returned by this library, not yet freed.
 */
void ws_detections_free(WsDetections *detections);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WISENSE_H */
