#ifndef STODET_H
#define STODET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum StodetStatus {
  STODET_STATUS_OK = 0,
  STODET_STATUS_INVALID_ARGUMENT = 1,
  STODET_STATUS_NULL_POINTER = 2,
  STODET_STATUS_SINGULAR = 3,
  STODET_STATUS_NUMERICAL = 4,
  STODET_STATUS_PANIC = 5,
} StodetStatus;

typedef enum StodetEstimator {
  /**
   * `‖A s‖⁻ⁿ`, estimates `|det A|⁻¹`.
   */
  STODET_ESTIMATOR_SPHERE_INV_DET = 0,
  /**
   * `‖A⁻¹ s‖⁻ⁿ`, estimates `|det A|`.
   */
  STODET_ESTIMATOR_INVERSE_SOLVE_DET = 1,
  /**
   * `N(Ax)/N(x)`, estimates `|det A|⁻¹`.
   */
  STODET_ESTIMATOR_GAUSSIAN_RATIO_INV_DET = 2,
  /**
   * `p(Ax)/q(x)` with `p = N(0, I)`, `q = N(0, q_sigma² I)`.
   */
  STODET_ESTIMATOR_IMPORTANCE_INV_DET = 3,
} StodetEstimator;

typedef enum StodetTarget {
  STODET_TARGET_INVERSE_ABS_DET = 0,
  STODET_TARGET_ABS_DET = 1,
} StodetTarget;

/**
 * Opaque dense matrix.
 */
typedef struct StodetMatrix StodetMatrix;

/**
 * Opaque convergence trace.
 */
typedef struct StodetTrace StodetTrace;

typedef struct StodetConfig {
  uint64_t num_samples;
  uint64_t seed;
  /**
   * Must divide `num_samples`.
   */
  size_t num_streams;
  /**
   * Proposal standard deviation for `STODET_ESTIMATOR_IMPORTANCE_INV_DET`;
   * ignored otherwise.
   */
  double q_sigma;
} StodetConfig;

typedef struct StodetEstimate {
  double log_mean;
  /**
   * `exp(log_mean)`; may be infinite when the estimate overflows.
   */
  double mean;
  double std_error;
  double log_std_error;
  uint64_t n_samples;
  enum StodetTarget target;
  bool heavy_tail;
  bool low_count;
} StodetEstimate;

/**
 * Writes `out = M x` for vectors of length `n`.
 */
typedef void (*StodetApplyFn)(void *ctx, const double *x, double *out, size_t n);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *stodet_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *stodet_version(void);

/**
 * Copies `n * n` row-major entries into a new matrix.
 *
 * # Safety
 * `entries` must point to `n * n` readable doubles; `out` must be writable.
 */
enum StodetStatus stodet_matrix_new(size_t n, const double *entries, struct StodetMatrix **out);

/**
 * Parses the text matrix format (dimension line, then rows).
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum StodetStatus stodet_matrix_from_text(const char *text, struct StodetMatrix **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum StodetStatus stodet_matrix_gaussian_iid(size_t n, uint64_t seed, struct StodetMatrix **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum StodetStatus stodet_matrix_orthogonal(size_t n, uint64_t seed, struct StodetMatrix **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum StodetStatus stodet_matrix_scaled_identity(size_t n, double scale, struct StodetMatrix **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum StodetStatus stodet_matrix_ill_conditioned(size_t n,
                                                double cond,
                                                uint64_t seed,
                                                struct StodetMatrix **out);

/**
 * Releases a matrix. Null is ignored.
 *
 * # Safety
 * `m` must come from a `stodet_matrix_*` constructor and not be freed twice.
 */
void stodet_matrix_free(struct StodetMatrix *m);

/**
 * Dimension `n`, or 0 for null.
 *
 * # Safety
 * `m` must be null or a live matrix handle.
 */
size_t stodet_matrix_dim(const struct StodetMatrix *m);

/**
 * Copies the row-major entries into `out`, which must hold `len >= n * n`
 * doubles.
 *
 * # Safety
 * `m` must be a live handle and `out` must be writable for `len` doubles.
 */
enum StodetStatus stodet_matrix_entries(const struct StodetMatrix *m, double *out, size_t len);

/**
 * Exact `log |det A|` from an LU factorization.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum StodetStatus stodet_matrix_log_abs_det(const struct StodetMatrix *m, double *out);

/**
 * Runs one estimator against a dense matrix.
 *
 * # Safety
 * `m` must be a live handle; `config` readable; `out` writable.
 */
enum StodetStatus stodet_estimate(const struct StodetMatrix *m,
                                  enum StodetEstimator estimator,
                                  const struct StodetConfig *config,
                                  struct StodetEstimate *out);

/**
 * Runs an estimator and records the running log-estimate every
 * `trace_stride` samples (and at the last sample).
 *
 * # Safety
 * `m` must be a live handle; `config` readable; `out` and `trace` writable.
 */
enum StodetStatus stodet_convergence(const struct StodetMatrix *m,
                                     enum StodetEstimator estimator,
                                     const struct StodetConfig *config,
                                     uint64_t trace_stride,
                                     struct StodetEstimate *out,
                                     struct StodetTrace **trace);

/**
 * Number of trace points, or 0 for null.
 *
 * # Safety
 * `t` must be null or a live trace handle.
 */
size_t stodet_trace_len(const struct StodetTrace *t);

/**
 * Reads trace point `i`.
 *
 * # Safety
 * `t` must be a live trace handle; `sample_index` and `running_log_mean`
 * writable.
 */
enum StodetStatus stodet_trace_get(const struct StodetTrace *t,
                                   size_t i,
                                   uint64_t *sample_index,
                                   double *running_log_mean);

/**
 * # Safety
 * `t` must come from [`stodet_convergence`] and not be freed twice.
 */
void stodet_trace_free(struct StodetTrace *t);

/**
 * Matrix-free estimation through a caller-supplied `apply` callback.
 *
 * Supported estimators are `SPHERE_INV_DET`, `GAUSSIAN_RATIO_INV_DET` and
 * `IMPORTANCE_INV_DET`. When `is_inverse` is true the callback applies
 * `A⁻¹`, so the estimates target `|det A|` instead. `num_streams > 1`
 * requires `thread_safe`: the callback is then invoked concurrently.
 *
 * # Safety
 * `apply` must write `n` doubles to `out` and must be safe to call with
 * `ctx` for the duration of this function; `config` readable; `out` writable.
 */
enum StodetStatus stodet_estimate_operator(size_t n,
                                           StodetApplyFn apply,
                                           void *ctx,
                                           bool is_inverse,
                                           bool thread_safe,
                                           enum StodetEstimator estimator,
                                           const struct StodetConfig *config,
                                           struct StodetEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STODET_H */
