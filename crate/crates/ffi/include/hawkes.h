#ifndef HAWKES_H
#define HAWKES_H

/* Generated by cbindgen from the hawkes-ffi sources. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum HawkesStatus {
  HAWKES_STATUS_OK = 0,
  HAWKES_STATUS_NULL_POINTER = 1,
  HAWKES_STATUS_INVALID_ARGUMENT = 2,
  HAWKES_STATUS_DOMAIN = 3,
  HAWKES_STATUS_IO = 4,
  HAWKES_STATUS_CONVERGENCE = 5,
  HAWKES_STATUS_NUMERICAL = 6,
  HAWKES_STATUS_PANIC = 7,
} HawkesStatus;

// Background family for [`hawkes_fit`].
typedef enum HawkesModel {
  HAWKES_MODEL_CONST = 0,
  // Piecewise linear with regularly spaced knots.
  HAWKES_MODEL_PIECEWISE_LINEAR = 1,
  // Spline background by empirical Bayes.
  HAWKES_MODEL_BCB = 2,
} HawkesModel;

// An event sequence with its observation window.
typedef struct HawkesEvents HawkesEvents;

// A fitted model.
typedef struct HawkesFit HawkesFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// Valid until the next call into this library from the same thread.
const char *hawkes_last_error_message(void);

// Builds an event sequence from `n` sorted times inside `[start, end]`.
//
// # Safety
// `times` must point to `n` readable doubles (or be null when `n == 0`);
// `out` must be writable.
enum HawkesStatus hawkes_events_new(const double *times,
                                    size_t n,
                                    double start,
                                    double end,
                                    struct HawkesEvents **out);

// Reads an events CSV (`# start=`, `# end=` header, one time per line).
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum HawkesStatus hawkes_events_read_csv(const char *path, struct HawkesEvents **out);

// Number of events; 0 for a null handle.
//
// # Safety
// `events` must be null or a live handle.
size_t hawkes_events_len(const struct HawkesEvents *events);

// Copies up to `capacity` event times into `buffer` and returns the total
// number of events.
//
// # Safety
// `events` must be null or a live handle; `buffer` must hold `capacity` doubles.
size_t hawkes_events_copy_times(const struct HawkesEvents *events, double *buffer, size_t capacity);

// # Safety
// `events` must be null or a handle not yet freed.
void hawkes_events_free(struct HawkesEvents *events);

// Log-likelihood under a constant background `mu` and an `order`-term
// exponential kernel.
//
// # Safety
// `alphas` and `betas` must hold `order` doubles; `out` must be writable.
enum HawkesStatus hawkes_log_likelihood_const(const struct HawkesEvents *events,
                                              double mu,
                                              const double *alphas,
                                              const double *betas,
                                              size_t order,
                                              double *out);

// Fits a model. `knot_spacing` is used by the piecewise-linear family and
// `k` (events per basis) by the spline family; both are ignored otherwise.
//
// # Safety
// `events` must be a live handle; `out` must be writable.
enum HawkesStatus hawkes_fit(const struct HawkesEvents *events,
                             enum HawkesModel model,
                             size_t order,
                             double knot_spacing,
                             size_t k,
                             struct HawkesFit **out);

// Model-comparison score of a fit (higher is better).
//
// # Safety
// `fit` must be a live handle; `out` must be writable.
enum HawkesStatus hawkes_fit_score(const struct HawkesFit *fit, double *out);

// Branching ratio `Σ α_j` of a fit.
//
// # Safety
// `fit` must be a live handle; `out` must be writable.
enum HawkesStatus hawkes_fit_branching_ratio(const struct HawkesFit *fit, double *out);

// Whether the optimizer met its convergence tolerance (1) or not (0).
//
// # Safety
// `fit` must be a live handle; `out` must be writable.
enum HawkesStatus hawkes_fit_converged(const struct HawkesFit *fit, int32_t *out);

// The fit as a JSON document. Release the string with [`hawkes_string_free`].
//
// # Safety
// `fit` must be a live handle; `out` must be writable.
enum HawkesStatus hawkes_fit_to_json(const struct HawkesFit *fit, char **out);

// # Safety
// `fit` must be null or a handle not yet freed.
void hawkes_fit_free(struct HawkesFit *fit);

// # Safety
// `s` must be null or a string returned by this library and not yet freed.
void hawkes_string_free(char *s);

// Simulates on `[start, end]` with constant background `mu`. The same
// seed always gives the same sequence.
//
// # Safety
// `alphas` and `betas` must hold `order` doubles; `out` must be writable.
enum HawkesStatus hawkes_simulate_const(double start,
                                        double end,
                                        double mu,
                                        const double *alphas,
                                        const double *betas,
                                        size_t order,
                                        uint64_t seed,
                                        struct HawkesEvents **out);

// Kolmogorov–Smirnov test of `n` values against U(0, 1).
//
// # Safety
// `values` must hold `n` doubles; `statistic` and `p_value` must be writable.
enum HawkesStatus hawkes_ks_uniform(const double *values,
                                    size_t n,
                                    double *statistic,
                                    double *p_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HAWKES_H */
