/* C interface for the blind interference alignment library. */

#ifndef BIA_H
#define BIA_H

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum BiaStatus {
  BIA_STATUS_OK = 0,
  BIA_STATUS_NULL_POINTER = 1,
  BIA_STATUS_INVALID_PARAMETER = 2,
  BIA_STATUS_NUMERICAL_FAILURE = 3,
  BIA_STATUS_CAPACITY_EXCEEDED = 4,
  BIA_STATUS_NOT_APPLICABLE = 5,
  BIA_STATUS_INTERNAL_ERROR = 6,
} BiaStatus;

typedef struct BiaPowerProfile BiaPowerProfile;

typedef struct BiaRateReport BiaRateReport;

typedef struct BiaRunLengthDist BiaRunLengthDist;

typedef struct BiaWeightFunction BiaWeightFunction;

/**
 * Experiment parameters, field-for-field the core config.
 */
typedef struct BiaExperimentConfig {
  /**
   * even block length
   */
  uint32_t n;
  /**
   * number of users
   */
  uint32_t k;
  /**
   * retain probability of the direct links, in [0, 1]
   */
  double p_direct;
  /**
   * retain probability of the cross links, in [0, 1]
   */
  double p_cross;
  /**
   * total transmit power, positive
   */
  double p_t;
  /**
   * noise power, positive
   */
  double noise;
  /**
   * Monte Carlo trial count
   */
  uint64_t trials;
  /**
   * trial t draws from base_seed + t
   */
  uint64_t base_seed;
} BiaExperimentConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of this library as a NUL-terminated static string.
 */
const char *bia_version(void);

/**
 * Fills `out` with the default experiment configuration.
 *
 * # Safety
 * `out` must be null or valid for writing one BiaExperimentConfig.
 */
enum BiaStatus bia_experiment_config_default(struct BiaExperimentConfig *out);

/**
 * Exact longest-run distribution for block length `n` and retain
 * probability `p`; writes a new handle to `out`.
 *
 * # Safety
 * `out` must be null or valid for writing one pointer.
 */
enum BiaStatus bia_run_length_new(uint32_t n, double p, struct BiaRunLengthDist **out);

/**
 * # Safety
 * `dist` must be null or a handle from bia_run_length_new not yet freed.
 */
void bia_run_length_free(struct BiaRunLengthDist *dist);

/**
 * P(F = f); zero outside 1..=n.
 *
 * # Safety
 * `dist` must be a live handle or null; `out` null or writable.
 */
enum BiaStatus bia_run_length_prob(const struct BiaRunLengthDist *dist, uint32_t f, double *out);

/**
 * Decodable-layer weights G for block length `n` and retain probability
 * `p`; writes a new handle to `out`.
 *
 * # Safety
 * `out` must be null or valid for writing one pointer.
 */
enum BiaStatus bia_weights_new(uint32_t n, double p, struct BiaWeightFunction **out);

/**
 * # Safety
 * `wf` must be null or a handle from bia_weights_new not yet freed.
 */
void bia_weights_free(struct BiaWeightFunction *wf);

/**
 * Number of layers n/2.
 *
 * # Safety
 * `wf` must be a live handle or null; `out` null or writable.
 */
enum BiaStatus bia_weights_layer_count(const struct BiaWeightFunction *wf, uint32_t *out);

/**
 * G(i) = P(at least i layers decodable); zero past n/2.
 *
 * # Safety
 * `wf` must be a live handle or null; `out` null or writable.
 */
enum BiaStatus bia_weights_get(const struct BiaWeightFunction *wf, uint32_t i, double *out);

/**
 * Closed-form per-layer allocation for the given weights; writes a new
 * profile handle to `out`.
 *
 * # Safety
 * `wf` must be a live handle or null; `out` null or writable.
 */
enum BiaStatus bia_layer_powers(const struct BiaWeightFunction *wf,
                                double noise,
                                double p_t,
                                struct BiaPowerProfile **out);

/**
 * # Safety
 * `profile` must be null or a handle from bia_layer_powers not yet freed.
 */
void bia_profile_free(struct BiaPowerProfile *profile);

/**
 * # Safety
 * `profile` must be a live handle or null; `out` null or writable.
 */
enum BiaStatus bia_profile_layer_count(const struct BiaPowerProfile *profile, uint32_t *out);

/**
 * Power of 1-based layer `i`.
 *
 * # Safety
 * `profile` must be a live handle or null; `out` null or writable.
 */
enum BiaStatus bia_profile_power(const struct BiaPowerProfile *profile, uint32_t i, double *out);

/**
 * # Safety
 * `profile` must be a live handle or null; `out` null or writable.
 */
enum BiaStatus bia_profile_total_power(const struct BiaPowerProfile *profile, double *out);

/**
 * Cumulative power P_Z(z) above decodable fraction z, for z in [0, 1/2].
 *
 * # Safety
 * `wf` must be a live handle or null; `out` null or writable.
 */
enum BiaStatus bia_cumulative_power(const struct BiaWeightFunction *wf,
                                    double z,
                                    double noise,
                                    double p_t,
                                    double *out);

/**
 * Expected average rate of a profile under the weights.
 *
 * # Safety
 * `profile` and `wf` must be live handles or null; `out` null or writable.
 */
enum BiaStatus bia_avg_rate_analytic(const struct BiaPowerProfile *profile,
                                     const struct BiaWeightFunction *wf,
                                     double noise,
                                     double *out);

/**
 * Half-DoF known-channel reference rate.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum BiaStatus bia_perfect_csi_baseline(double p_t, double noise, double *out);

/**
 * Runs the full Monte Carlo experiment described by `cfg`: weights and
 * allocation are derived from the config, trials are seeded from
 * base_seed. Writes a new report handle to `out`.
 *
 * # Safety
 * `cfg` must be null or valid for reading; `out` null or writable.
 */
enum BiaStatus bia_monte_carlo_avg_rate(const struct BiaExperimentConfig *cfg,
                                        struct BiaRateReport **out);

/**
 * # Safety
 * `report` must be null or a handle from bia_monte_carlo_avg_rate not yet
 * freed.
 */
void bia_report_free(struct BiaRateReport *report);

/**
 * # Safety
 * `report` must be a live handle or null; `out` null or writable.
 */
enum BiaStatus bia_report_analytic(const struct BiaRateReport *report, double *out);

/**
 * # Safety
 * `report` must be a live handle or null; `out` null or writable.
 */
enum BiaStatus bia_report_empirical(const struct BiaRateReport *report, double *out);

/**
 * # Safety
 * `report` must be a live handle or null; `out` null or writable.
 */
enum BiaStatus bia_report_std_error(const struct BiaRateReport *report, double *out);

/**
 * # Safety
 * `report` must be a live handle or null; `out` null or writable.
 */
enum BiaStatus bia_report_baseline(const struct BiaRateReport *report, double *out);

/**
 * # Safety
 * `report` must be a live handle or null; `out` null or writable.
 */
enum BiaStatus bia_report_layer_count(const struct BiaRateReport *report, uint32_t *out);

/**
 * Rate of 1-based layer `i`.
 *
 * # Safety
 * `report` must be a live handle or null; `out` null or writable.
 */
enum BiaStatus bia_report_layer_rate(const struct BiaRateReport *report, uint32_t i, double *out);

/**
 * Count of trials that decoded exactly `layers` layers.
 *
 * # Safety
 * `report` must be a live handle or null; `out` null or writable.
 */
enum BiaStatus bia_report_histogram(const struct BiaRateReport *report,
                                    uint32_t layers,
                                    uint64_t *out);

/**
 * Fraction of sampled channel pairs whose stacked signal-and-channel
 * matrix hits the predicted rank.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum BiaStatus bia_verify_lemma1(uint32_t n,
                                 uint32_t d_v,
                                 uint32_t f,
                                 uint64_t trials,
                                 uint64_t seed,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BIA_H */
