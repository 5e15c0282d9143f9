#ifndef SCORECUSUM_H
#define SCORECUSUM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum ScStatus {
  SC_STATUS_OK = 0,
  SC_STATUS_NULL_POINTER = 1,
  SC_STATUS_USAGE = 2,
  SC_STATUS_PARSE = 3,
  SC_STATUS_NUMERIC = 4,
  SC_STATUS_IO = 5,
  SC_STATUS_PANIC = 6,
} ScStatus;

// Streaming CUSUM detector.
typedef struct ScDetector ScDetector;

// A conditional score field: closed-form Gaussian or a trained network.
typedef struct ScField ScField;

// Transition kernel `N((1−α)x + shift·tanh(x), σ² I)` on `ℝ^dim`.
typedef struct ScKernelSpec {
  size_t dim;
  double alpha;
  double sigma;
  double shift;
} ScKernelSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null if there was none.
// Release with [`sc_string_free`].
char *sc_last_error_message(void);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void sc_string_free(char *s);

// Closed-form score field of a Gaussian kernel.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum ScStatus sc_field_gaussian(struct ScKernelSpec spec, struct ScField **out);

// Loads a trained model file.
//
// # Safety
// `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
enum ScStatus sc_field_load_model(const char *path, struct ScField **out);

// State dimension of a field, or 0 for a null handle.
//
// # Safety
// `field` must be null or a live handle.
size_t sc_field_dim(const struct ScField *field);

// # Safety
// `field` must be null or a live handle; it is invalid afterwards.
void sc_field_free(struct ScField *field);

// Hyvärinen score of one transition `prev → next`, both of length `dim`.
//
// # Safety
// `field` must be a live handle; `prev` and `next` must hold `dim` values.
enum ScStatus sc_hyvarinen_score(const struct ScField *field,
                                 const double *prev,
                                 const double *next,
                                 size_t dim,
                                 double *out);

// Score differences `S_H(p) − S_H(q)` along a path of `n_states` row-major
// states; writes `n_states − 1` values to `out` (nothing when `n_states < 2`).
//
// # Safety
// `states` must hold `n_states · dim` values and `out` room for `n_states − 1`.
enum ScStatus sc_score_differences(const struct ScField *p,
                                   const struct ScField *q,
                                   const double *states,
                                   size_t n_states,
                                   size_t dim,
                                   double *out);

// New detector with threshold `b`. Increments are clipped to `[−M, M]` when
// `truncate` is true.
//
// # Safety
// `out` must be writable.
enum ScStatus sc_detector_new(double threshold,
                              bool truncate,
                              double level,
                              struct ScDetector **out);

// Feeds one increment. `alarmed` (optional) receives whether `W ≥ b` now.
// The detector keeps accumulating after an alarm until reset.
//
// # Safety
// `detector` must be a live handle; `alarmed` null or writable.
enum ScStatus sc_detector_update(struct ScDetector *detector, double increment, bool *alarmed);

// Current statistic `W_n` (NaN for a null handle).
//
// # Safety
// `detector` must be null or a live handle.
double sc_detector_statistic(const struct ScDetector *detector);

// Increments consumed since creation or the last reset.
//
// # Safety
// `detector` must be null or a live handle.
uint64_t sc_detector_time(const struct ScDetector *detector);

// # Safety
// `detector` must be null or a live handle.
void sc_detector_reset(struct ScDetector *detector);

// # Safety
// `detector` must be null or a live handle; it is invalid afterwards.
void sc_detector_free(struct ScDetector *detector);

// `factor · M`.
//
// # Safety
// `out` must be writable.
enum ScStatus sc_heuristic_mu(double truncation_level, double factor, double *out);

// `2(l+1)‖φ‖/λ`.
//
// # Safety
// `out` must be writable.
enum ScStatus sc_concentration_mu(double norm_phi, uint32_t l, double lambda, double *out);

// Lower bound on the mean time to false alarm; requires `b > mu`.
//
// # Safety
// `out` must be writable.
enum ScStatus sc_false_alarm_lower_bound(double delta, double mu, double b, double *out);

// `n0 = ⌊(b+μ)/I⌋` and the leading-order delay bound `1 + n0`.
//
// # Safety
// `n0` and `bound` must be writable.
enum ScStatus sc_delay_upper_bound(double b,
                                   double mu,
                                   double post_drift,
                                   uint64_t *n0,
                                   double *bound);

// # Safety
// `out` must be writable.
enum ScStatus sc_hoeffding_tail(uint64_t n, double eps, double mu_f, double *out);

// Simulates `length` states (row-major into `out`, which holds `out_len`
// values). `post` may be null when `change_point` is 0, meaning no change;
// otherwise states with index `≥ change_point` follow the post kernel.
//
// # Safety
// `pre` must be valid; `post` null or valid; `out` must hold `out_len` values.
enum ScStatus sc_simulate_path(const struct ScKernelSpec *pre,
                               const struct ScKernelSpec *post,
                               uint64_t change_point,
                               size_t length,
                               size_t burn_in,
                               uint64_t seed,
                               double *out,
                               size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCORECUSUM_H */
