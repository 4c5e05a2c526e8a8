#ifndef FRACVI_H
#define FRACVI_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FracviStatus {
  FRACVI_STATUS_OK = 0,
  FRACVI_STATUS_NULL_POINTER = 1,
  FRACVI_STATUS_DIVERGENCE_INFINITE = 2,
  FRACVI_STATUS_INVALID_GAUSSIAN = 3,
  FRACVI_STATUS_INVALID_FRACTION = 4,
  FRACVI_STATUS_INVALID_VARIANCE = 5,
  FRACVI_STATUS_DIMENSION_TOO_LARGE = 6,
  FRACVI_STATUS_REGRESSION_DEGENERATE = 7,
  FRACVI_STATUS_SUBSET_INVALID = 8,
  FRACVI_STATUS_INVALID_ARGUMENT = 9,
  FRACVI_STATUS_PANIC = 10,
} FracviStatus;

/**
 * A fitted Gaussian mixture.
 */
typedef struct FracviGmmFit FracviGmmFit;

/**
 * A univariate Gaussian by mean and variance.
 */
typedef struct FracviGaussian {
  double mean;
  double variance;
} FracviGaussian;

/**
 * The two terms of a bound and their difference.
 */
typedef struct FracviBound {
  double data_term;
  double complexity_term;
  double total;
} FracviBound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *fracvi_last_error_message(void);

/**
 * `KL(q ‖ p)`.
 *
 * # Safety
 * Out-pointers must be NULL or writable.
 */
enum FracviStatus fracvi_kl_gaussian(struct FracviGaussian q,
                                     struct FracviGaussian p,
                                     double *result);

/**
 * Rényi divergence `D_α(q ‖ p)`.
 *
 * # Safety
 * Out-pointers must be NULL or writable.
 */
enum FracviStatus fracvi_renyi_gaussian(struct FracviGaussian q,
                                        struct FracviGaussian p,
                                        double alpha,
                                        double *result);

/**
 * `log p(D)` of the conjugate Gaussian-mean model.
 *
 * # Safety
 * `data` must point to `len` doubles (or be NULL with `len == 0`).
 */
enum FracviStatus fracvi_log_evidence(struct FracviGaussian prior,
                                      double obs_variance,
                                      const double *data,
                                      size_t len,
                                      double *result);

/**
 * `LB_γ` of `q` on the conjugate Gaussian-mean model; `γ = 1` gives the ELBO.
 *
 * # Safety
 * `data` must point to `len` doubles (or be NULL with `len == 0`).
 */
enum FracviStatus fracvi_lb_gamma(struct FracviGaussian prior,
                                  double obs_variance,
                                  const double *data,
                                  size_t len,
                                  struct FracviGaussian q,
                                  double gamma,
                                  struct FracviBound *result);

/**
 * The ELBO of `q` on the conjugate Gaussian-mean model.
 *
 * # Safety
 * `data` must point to `len` doubles (or be NULL with `len == 0`).
 */
enum FracviStatus fracvi_elbo(struct FracviGaussian prior,
                              double obs_variance,
                              const double *data,
                              size_t len,
                              struct FracviGaussian q,
                              struct FracviBound *result);

/**
 * Interval length expected with `n/k` observations per component.
 *
 * # Safety
 * Out-pointers must be NULL or writable.
 */
enum FracviStatus fracvi_ideal_length(size_t k,
                                      size_t n,
                                      double obs_variance,
                                      double alpha,
                                      double *result);

/**
 * Central `1−α` credible interval of a Gaussian.
 *
 * # Safety
 * Out-pointers must be NULL or writable.
 */
enum FracviStatus fracvi_credible_interval(struct FracviGaussian g,
                                           double alpha,
                                           double *lower,
                                           double *upper);

/**
 * Fit a `k`-component mixture with uniform assignment prior at fraction
 * `gamma ∈ (0, 1]` from the standard initialization. Release the handle
 * with [`fracvi_gmm_fit_free`].
 *
 * # Safety
 * `data` must point to `len` doubles; `fit` must be writable.
 */
enum FracviStatus fracvi_gmm_fit(const double *data,
                                 size_t len,
                                 size_t k,
                                 double prior_variance,
                                 double obs_variance,
                                 double gamma,
                                 struct FracviGmmFit **fit);

/**
 * Number of components of a fit.
 *
 * # Safety
 * `fit` must be a live handle.
 */
enum FracviStatus fracvi_gmm_fit_components_len(const struct FracviGmmFit *fit, size_t *result);

/**
 * Copy up to `capacity` fitted components into `components`; the number
 * copied is written to `written`.
 *
 * # Safety
 * `fit` must be a live handle and `components` writable for `capacity` entries.
 */
enum FracviStatus fracvi_gmm_fit_components(const struct FracviGmmFit *fit,
                                            struct FracviGaussian *components,
                                            size_t capacity,
                                            size_t *written);

/**
 * Final bound, sweep count and convergence flag of a fit. Any of the
 * out-pointers may be NULL.
 *
 * # Safety
 * `fit` must be a live handle.
 */
enum FracviStatus fracvi_gmm_fit_summary(const struct FracviGmmFit *fit,
                                         double *bound,
                                         size_t *iterations,
                                         bool *converged);

/**
 * Release a fit. NULL is ignored.
 *
 * # Safety
 * `fit` must be NULL or a handle not yet freed.
 */
void fracvi_gmm_fit_free(struct FracviGmmFit *fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRACVI_H */
