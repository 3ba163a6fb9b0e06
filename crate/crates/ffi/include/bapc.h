#ifndef BAPC_H
#define BAPC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BapcCorrection {
  BAPC_CORRECTION_NEAREST_NEIGHBOR = 0,
  BAPC_CORRECTION_AR_NET = 1,
} BapcCorrection;

typedef enum BapcFamily {
  BAPC_FAMILY_CONSTANT = 0,
  BAPC_FAMILY_LINEAR = 1,
  BAPC_FAMILY_POLY_SEASONAL = 2,
  BAPC_FAMILY_SINUSOID = 3,
  BAPC_FAMILY_DAMPED_SINUSOID = 4,
  BAPC_FAMILY_AR2 = 5,
} BapcFamily;

// Outcome of a call.
typedef enum BapcStatus {
  BAPC_STATUS_OK = 0,
  BAPC_STATUS_NULL_POINTER = 1,
  // Bad configuration, series or index range.
  BAPC_STATUS_INVALID_ARGUMENT = 2,
  // Parameters outside a conversion's domain, or degenerate input.
  BAPC_STATUS_DOMAIN = 3,
  BAPC_STATUS_INSUFFICIENT_DATA = 4,
  BAPC_STATUS_FIT_FAILED = 5,
  // Closed form unavailable at this index.
  BAPC_STATUS_PRECISION = 6,
  BAPC_STATUS_NUMERICAL = 7,
  // Output buffer shorter than the value count.
  BAPC_STATUS_BUFFER_TOO_SMALL = 8,
  BAPC_STATUS_PANIC = 9,
} BapcStatus;

typedef enum BapcSyntheticKind {
  BAPC_SYNTHETIC_KIND_STEP = 0,
  BAPC_SYNTHETIC_KIND_RAMP = 1,
  BAPC_SYNTHETIC_KIND_SINACP = 2,
  BAPC_SYNTHETIC_KIND_SINFCP = 3,
} BapcSyntheticKind;

// Fitted base models and correction of one run.
typedef struct BapcResult BapcResult;

// A time series with consecutive integer indices.
typedef struct BapcSeries BapcSeries;

// Parameters of a synthetic series.
typedef struct BapcSyntheticParams {
  enum BapcSyntheticKind kind;
  double u0;
  double v0;
  double force;
  double t_star;
  double omega;
  double nu;
  size_t n;
  int64_t change_index;
  // Nonzero samples on the unshifted grid.
  uint8_t raw_grid;
} BapcSyntheticParams;

// Settings for one BAPC run.
typedef struct BapcRunConfig {
  enum BapcFamily family;
  // Period of the seasonal families.
  double period;
  enum BapcCorrection correction;
  // Network order, single hidden layer width, epochs and step size.
  size_t arnet_order;
  size_t arnet_hidden;
  size_t arnet_epochs;
  double arnet_learning_rate;
  // Training window size; 0 uses the whole series.
  size_t n;
  // Correction window size.
  size_t r;
  // Nonzero enables outlier rejection in AR(2) fits.
  uint8_t robust;
  uint64_t seed;
} BapcRunConfig;

// `alpha exp(-beta t) cos(omega t + phi)`.
typedef struct BapcSinusoid {
  double alpha;
  double beta;
  double omega;
  double phi;
} BapcSinusoid;

// `y_t = phi1 y_{t-1} + phi2 y_{t-2}` started from `(y1, y2)`.
typedef struct BapcAr2 {
  double y1;
  double y2;
  double phi1;
  double phi2;
} BapcAr2;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, empty after a
// success. Valid until the next call on the same thread.
const char *bapc_last_error(void);

// Library version as a static NUL-terminated string.
const char *bapc_version(void);

// Copies `len` values into a new series whose first index is `start_index`.
//
// # Safety
// `values` must point to `len` readable doubles and `out` must be writable.
enum BapcStatus bapc_series_new(const double *values,
                                size_t len,
                                int64_t start_index,
                                struct BapcSeries **out);

// # Safety
// `series` must come from this library and not be freed twice.
void bapc_series_free(struct BapcSeries *series);

// Number of samples, 0 for a null handle.
//
// # Safety
// `series` must be null or a live handle.
size_t bapc_series_len(const struct BapcSeries *series);

// Index of the first sample, 0 for a null handle.
//
// # Safety
// `series` must be null or a live handle.
int64_t bapc_series_start_index(const struct BapcSeries *series);

// # Safety
// `series` must be live and `out` must hold `cap` doubles.
enum BapcStatus bapc_series_values(const struct BapcSeries *series,
                                   double *out,
                                   size_t cap,
                                   size_t *written);

// Fills `out` with the default parameters of `kind`.
//
// # Safety
// `out` must be writable.
enum BapcStatus bapc_synthetic_defaults(enum BapcSyntheticKind kind,
                                        struct BapcSyntheticParams *out);

// # Safety
// `params` must be readable and `out` writable.
enum BapcStatus bapc_synthetic_generate(const struct BapcSyntheticParams *params,
                                        struct BapcSeries **out);

// Fills `out` with defaults: constant base, 1-NN correction, whole series,
// r = 0, robust AR(2), seed 0.
//
// # Safety
// `out` must be writable.
enum BapcStatus bapc_run_config_default(struct BapcRunConfig *out);

// Runs BAPC on the last `config.n` samples of `series`.
//
// # Safety
// `series` and `config` must be live, `out` writable.
enum BapcStatus bapc_run(const struct BapcSeries *series,
                         const struct BapcRunConfig *config,
                         struct BapcResult **out);

// # Safety
// `result` must come from [`bapc_run`] and not be freed twice.
void bapc_result_free(struct BapcResult *result);

// Number of base-model parameters, 0 for a null handle.
//
// # Safety
// `result` must be null or live.
size_t bapc_result_n_params(const struct BapcResult *result);

// Name of parameter `k`, or null when out of range. Owned by `result`.
//
// # Safety
// `result` must be null or live.
const char *bapc_result_param_name(const struct BapcResult *result, size_t k);

// Parameters fitted on the observed window.
//
// # Safety
// `result` must be live and `out` must hold `cap` doubles.
enum BapcStatus bapc_result_theta0(const struct BapcResult *result,
                                   double *out,
                                   size_t cap,
                                   size_t *written);

// Parameters fitted on the corrected window.
//
// # Safety
// `result` must be live and `out` must hold `cap` doubles.
enum BapcStatus bapc_result_theta_r(const struct BapcResult *result,
                                    double *out,
                                    size_t cap,
                                    size_t *written);

// `theta0 - theta_r`.
//
// # Safety
// `result` must be live and `out` must hold `cap` doubles.
enum BapcStatus bapc_result_delta_theta(const struct BapcResult *result,
                                        double *out,
                                        size_t cap,
                                        size_t *written);

// Predicted residuals on the correction window.
//
// # Safety
// `result` must be live and `out` must hold `cap` doubles.
enum BapcStatus bapc_result_correction(const struct BapcResult *result,
                                       double *out,
                                       size_t cap,
                                       size_t *written);

// Surrogate correction `f_theta0(t) - f_theta_r(t)`.
//
// # Safety
// `result` must be live and `out` writable.
enum BapcStatus bapc_result_surrogate(const struct BapcResult *result, double t, double *out);

// Integrated-gradients attribution of the surrogate at `t`, one value per
// parameter. `completeness_residual`, if given, receives
// `sum(values) - surrogate`.
//
// # Safety
// `result` must be live and `out` must hold `cap` doubles.
enum BapcStatus bapc_result_ig(const struct BapcResult *result,
                               double t,
                               double *out,
                               size_t cap,
                               size_t *written,
                               double *completeness_residual);

// The AR(2) process whose value at `t` equals the sinusoid at `t - 1`.
//
// # Safety
// `input` must be readable and `out` writable.
enum BapcStatus bapc_sin_to_ar2(const struct BapcSinusoid *input, struct BapcAr2 *out);

// Inverse of [`bapc_sin_to_ar2`] for oscillating processes.
//
// # Safety
// `input` must be readable and `out` writable.
enum BapcStatus bapc_ar2_to_sin(const struct BapcAr2 *input, struct BapcSinusoid *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BAPC_H */
