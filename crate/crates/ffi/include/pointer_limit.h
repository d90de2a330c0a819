#ifndef POINTER_LIMIT_H
#define POINTER_LIMIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PlMethod {
  PL_METHOD_KRYLOV = 0,
  PL_METHOD_DENSE = 1,
} PlMethod;

typedef enum PlStatus {
  PL_STATUS_OK = 0,
  PL_STATUS_NULL_POINTER = 1,
  PL_STATUS_INVALID_ARGUMENT = 2,
  PL_STATUS_NON_CONVERGENCE = 3,
  PL_STATUS_BUFFER_TOO_SMALL = 4,
  PL_STATUS_INTERNAL = 5,
} PlStatus;

/**
 * Opaque model handle.
 */
typedef struct PlModel PlModel;

typedef struct PlComplex {
  double re;
  double im;
} PlComplex;

/**
 * Evolution settings; zero fields take the library defaults.
 */
typedef struct PlEvolution {
  enum PlMethod method;
  double dt;
  double tolerance;
  size_t krylov_dim;
} PlEvolution;

/**
 * One trajectory sample; `overlap_d` is NaN when a branch is absent.
 */
typedef struct PlSample {
  double t;
  double pointer_expectation;
  double threshold_prob;
  double rho01_abs;
  double overlap_d;
  double norm_error;
} PlSample;

/**
 * `time_avg_d` is NaN when a branch is absent.
 */
typedef struct PlBornEstimate {
  double p_hat;
  double target;
  double abs_error;
  double mixture_distance;
  double tail_variation;
  double time_avg_d;
  bool converged;
} PlBornEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Model with every coupling equal to `g`.
 *
 * # Safety
 * `out` must point to writable storage for one handle.
 */
enum PlStatus pl_model_new_uniform(size_t n,
                                   double g,
                                   double alpha,
                                   double epsilon,
                                   struct PlModel **out);

/**
 * Model with couplings drawn uniformly from [g_min, g_max] by `seed`.
 *
 * # Safety
 * `out` must point to writable storage for one handle.
 */
enum PlStatus pl_model_new_disordered(size_t n,
                                      uint64_t seed,
                                      double g_min,
                                      double g_max,
                                      double alpha,
                                      double epsilon,
                                      struct PlModel **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `model` must be null or a handle from `pl_model_new_*` not yet freed.
 */
void pl_model_free(struct PlModel *model);

/**
 * Number of amplifier units, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t pl_model_units(const struct PlModel *model);

/**
 * Copies the couplings into `out`, which holds `len` doubles.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for `len` writes.
 */
enum PlStatus pl_model_couplings(const struct PlModel *model, double *out, size_t len);

/**
 * Number of samples `pl_simulate` produces for `t_max` and `dt`.
 */
size_t pl_sample_count(double t_max, double dt);

/**
 * Samples the trajectory from the inverted initial state at t = 0, dt, …, t_max.
 * `evolution` may be null for defaults; its `dt` is ignored in favour of `dt`.
 *
 * # Safety
 * `model` must be a live handle, `evolution` null or valid, `out` valid for
 * `capacity` writes and `written` writable.
 */
enum PlStatus pl_simulate(const struct PlModel *model,
                          struct PlComplex c0,
                          struct PlComplex c1,
                          double theta,
                          double t_max,
                          double dt,
                          const struct PlEvolution *evolution,
                          struct PlSample *out,
                          size_t capacity,
                          size_t *written);

/**
 * Time-averaged detection probability over [0, t_max].
 *
 * # Safety
 * `model` must be a live handle, `evolution` null or valid and `out` writable.
 */
enum PlStatus pl_born_estimate(const struct PlModel *model,
                               struct PlComplex c0,
                               struct PlComplex c1,
                               double theta,
                               double t_max,
                               const struct PlEvolution *evolution,
                               struct PlBornEstimate *out);

/**
 * Operator norm of the commutator of the two setups' projectors.
 */
double pl_setup_commutator(double alpha, double alpha_prime);

/**
 * Message of the calling thread's last failure; empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *pl_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POINTER_LIMIT_H */
