#ifndef VLFMAC_H
#define VLFMAC_H

/* Generated by the build script; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every ABI call.
 */
typedef enum VlfStatus {
  /**
   * Success.
   */
  VlfStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  VlfStatus_NullPointer = 1,
  /**
   * A parameter lies outside its documented domain.
   */
  VlfStatus_InvalidArgument = 2,
  /**
   * Parameters are valid but the configuration has no solution.
   */
  VlfStatus_Infeasible = 3,
} VlfStatus;

/**
 * Opaque handle to a rate-region boundary.
 */
typedef struct VlfRegion VlfRegion;

/**
 * Opaque handle to the single-letter channel statistics.
 */
typedef struct VlfStats VlfStats;

/**
 * Log message-size triple (user 1, user 2, product), in nats.
 */
typedef struct VlfRateTriple {
  double r1;
  double r2;
  double rsum;
} VlfRateTriple;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Gaussian channel capacity `ln(1 + x) / 2` in nats; `x` is the
 * signal-to-noise ratio.
 *
 * # Safety
 * `out` must be a valid writable pointer.
 */
enum VlfStatus vlf_capacity(double x, double *out);

/**
 * Binary entropy in nats of a probability in `[0, 1]`.
 *
 * # Safety
 * `out` must be a valid writable pointer.
 */
enum VlfStatus vlf_binary_entropy(double p, double *out);

/**
 * Creates the statistics handle for transmit powers `p1`, `p2` (both
 * positive and finite). The handle must be released with
 * `vlf_stats_free`.
 *
 * # Safety
 * `out` must be a valid writable pointer.
 */
enum VlfStatus vlf_stats_new(double p1, double p2, struct VlfStats **out);

/**
 * Releases a statistics handle; a null pointer is ignored.
 *
 * # Safety
 * `stats` must be null or a pointer from `vlf_stats_new` not yet freed.
 */
void vlf_stats_free(struct VlfStats *stats);

/**
 * Reads the drift, variance, and dispersion ratio of one walk
 * (`walk` is 1, 2, or 3). Each out-pointer may be null to skip that
 * value.
 *
 * # Safety
 * `stats` must be a live handle; non-null out-pointers must be writable.
 */
enum VlfStatus vlf_stats_get(const struct VlfStats *stats,
                             uint32_t walk,
                             double *mu,
                             double *sigma2,
                             double *l);

/**
 * Closed-form dispersion-mixing constant of the channel.
 *
 * # Safety
 * `stats` must be a live handle; `out` must be writable.
 */
enum VlfStatus vlf_a_constant(const struct VlfStats *stats, double *out);

/**
 * Estimates the constant threshold offset (and returns the analytic
 * dispersion constant) from `trials` renewal simulations per walk.
 * Deterministic in (`trials`, `seed`).
 *
 * # Safety
 * `stats` must be a live handle; `a_out` and `g_out` must be writable.
 */
enum VlfStatus vlf_estimate_constants(const struct VlfStats *stats,
                                      uint64_t trials,
                                      uint64_t seed,
                                      double *a_out,
                                      double *g_out);

/**
 * Decoding thresholds for a target expected decision time: writes three
 * values to `gamma_out`.
 *
 * # Safety
 * `stats` must be a live handle; `gamma_out` must point to writable space
 * for three doubles.
 */
enum VlfStatus vlf_thresholds_from_target(const struct VlfStats *stats,
                                          double n_prime,
                                          double a_const,
                                          double g_const,
                                          double *gamma_out);

/**
 * Largest message counts satisfying the three threshold caps, maximizing
 * the product (ties favor `m1`). `clamped_out` is set to 1 when a cap fell
 * below one message and was clamped up.
 *
 * # Safety
 * All out-pointers must be writable.
 */
enum VlfStatus vlf_message_sizes(double gamma1,
                                 double gamma2,
                                 double gamma3,
                                 double n_prime,
                                 uint64_t *m1_out,
                                 uint64_t *m2_out,
                                 int32_t *clamped_out);

/**
 * Achievable log message sizes of the stop-feedback scheme.
 *
 * # Safety
 * `stats` must be a live handle; `out` must be writable.
 */
enum VlfStatus vlf_sf_achievable(const struct VlfStats *stats,
                                 double n,
                                 double eps,
                                 double a_const,
                                 struct VlfRateTriple *out);

/**
 * Converse log message sizes of the stop-feedback scheme.
 *
 * # Safety
 * `stats` must be a live handle; `out` must be writable.
 */
enum VlfStatus vlf_sf_converse(const struct VlfStats *stats,
                               double n,
                               double eps,
                               struct VlfRateTriple *out);

/**
 * Achievable log message sizes under full feedback with input correlation
 * `rho` in `[0, 1]`; needs `n > e`.
 *
 * # Safety
 * `stats` must be a live handle; `out` must be writable.
 */
enum VlfStatus vlf_vlft_achievable(const struct VlfStats *stats,
                                   double n,
                                   double eps,
                                   double rho,
                                   struct VlfRateTriple *out);

/**
 * Converse log message sizes under full feedback with input correlation
 * `rho` in `[0, 1]`.
 *
 * # Safety
 * `stats` must be a live handle; `out` must be writable.
 */
enum VlfStatus vlf_vlft_converse(const struct VlfStats *stats,
                                 double n,
                                 double eps,
                                 double rho,
                                 struct VlfRateTriple *out);

/**
 * Builds a rate-region boundary. `scheme` is 0 for the stop-feedback
 * pentagon, 1 for the correlation-swept full-feedback region; `grid` is
 * the number of rate columns for the swept region. The handle must be
 * released with `vlf_region_free`.
 *
 * # Safety
 * `stats` must be a live handle; `out` must be writable.
 */
enum VlfStatus vlf_region_new(const struct VlfStats *stats,
                              double eps,
                              uint32_t scheme,
                              size_t grid,
                              struct VlfRegion **out);

/**
 * Number of boundary points.
 *
 * # Safety
 * `region` must be a live handle; `out` must be writable.
 */
enum VlfStatus vlf_region_num_points(const struct VlfRegion *region, size_t *out);

/**
 * Reads boundary point `index` (x-ascending order).
 *
 * # Safety
 * `region` must be a live handle; `r1` and `r2` must be writable.
 */
enum VlfStatus vlf_region_point(const struct VlfRegion *region,
                                size_t index,
                                double *r1,
                                double *r2);

/**
 * Writes 1 to `out` when the rate pair lies in the region (within `tol`),
 * else 0.
 *
 * # Safety
 * `region` must be a live handle; `out` must be writable.
 */
enum VlfStatus vlf_region_contains(const struct VlfRegion *region,
                                   double r1,
                                   double r2,
                                   double tol,
                                   int32_t *out);

/**
 * Releases a region handle; a null pointer is ignored.
 *
 * # Safety
 * `region` must be null or a pointer from `vlf_region_new` not yet freed.
 */
void vlf_region_free(struct VlfRegion *region);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* VLFMAC_H */
