/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef ULTRAINJECT_H
#define ULTRAINJECT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum UiStatus {
  UI_STATUS_OK = 0,
  // Bad argument, malformed input or violated precondition.
  UI_STATUS_INVALID_ARGUMENT = 1,
  // A required pointer was null.
  UI_STATUS_NULL_POINTER = 2,
  // I/O or other runtime failure.
  UI_STATUS_RUNTIME = 3,
  // The library panicked; the message holds the payload.
  UI_STATUS_PANIC = 4,
} UiStatus;

// Opaque owned waveform.
typedef struct UiWaveform UiWaveform;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Last error message on this thread, or null. The pointer stays valid
// until the next failing call on the same thread.
const char *ui_last_error(void);

// Library version as a static string.
const char *ui_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or come from a `ui_*_json` call and not be freed yet.
void ui_string_free(char *s);

// Copies `len` samples into a new waveform.
//
// # Safety
// `samples` must point to `len` readable doubles; `out` must be writable.
enum UiStatus ui_waveform_new(uint32_t sample_rate_hz,
                              const double *samples,
                              size_t len,
                              struct UiWaveform **out);

// # Safety
// `w` must be null or a live handle; it is invalid afterwards.
void ui_waveform_free(struct UiWaveform *w);

// Number of samples; 0 for null.
//
// # Safety
// `w` must be null or a live handle.
size_t ui_waveform_len(const struct UiWaveform *w);

// Sample rate in Hz; 0 for null.
//
// # Safety
// `w` must be null or a live handle.
uint32_t ui_waveform_sample_rate(const struct UiWaveform *w);

// Copies up to `cap` samples into `buf` and stores the total sample count
// in `total` (which may exceed `cap`).
//
// # Safety
// `w` must be a live handle, `buf` writable for `cap` doubles (may be null
// when `cap` is 0) and `total` writable.
enum UiStatus ui_waveform_copy(const struct UiWaveform *w, double *buf, size_t cap, size_t *total);

// AM modulation of `baseband` onto `carrier_hz` with index `depth`.
//
// # Safety
// `baseband` must be a live handle and `out` writable.
enum UiStatus ui_modulate(const struct UiWaveform *baseband,
                          double carrier_hz,
                          double depth,
                          struct UiWaveform **out);

// Microphone nonlinearity `a1·x + a2·x²`, low-pass at `cutoff_hz` and mean
// removal. The recovered audio covers input samples from `*start_index`.
//
// # Safety
// `passband` must be a live handle; `out` and `start_index` writable.
enum UiStatus ui_recover_baseband(const struct UiWaveform *passband,
                                  double a1,
                                  double a2,
                                  double cutoff_hz,
                                  struct UiWaveform **out,
                                  size_t *start_index);

// Pearson correlation of two arrays of `len` doubles.
//
// # Safety
// `a` and `b` must each hold `len` doubles; `out` writable.
enum UiStatus ui_correlation(const double *a, const double *b, size_t len, double *out);

// Single-play success probability for a shipped device profile.
//
// # Safety
// `profile` must be a NUL-terminated string; `out` writable.
enum UiStatus ui_delivery_probability(double distance_m,
                                      double angle_offset_deg,
                                      double noise_db,
                                      const char *profile,
                                      double *out);

// `1 − (1 − p)^n`.
//
// # Safety
// `out` must be writable.
enum UiStatus ui_repeated_success(double p_single, uint32_t n, double *out);

// Runs the attack loop in a scripted environment. `config_json` may be
// null for defaults. The report is written to `*report_json`.
//
// # Safety
// Strings must be null or NUL-terminated; `report_json` writable.
enum UiStatus ui_simulate_json(const char *env_json, const char *config_json, char **report_json);

// One feedback round over a JSON-lines scan log. `params_json` may be null
// for defaults. The outcome is written to `*outcome_json`.
//
// # Safety
// Strings must be null or NUL-terminated; `outcome_json` writable.
enum UiStatus ui_feedback_replay_json(const char *scan_log,
                                      const char *params_json,
                                      char **outcome_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ULTRAINJECT_H */
