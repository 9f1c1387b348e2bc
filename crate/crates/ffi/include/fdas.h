#ifndef FDAS_H
#define FDAS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FdasConv {
  FDAS_CONV_NAIVE_TD = 0,
  FDAS_CONV_OLA_TD = 1,
  FDAS_CONV_NAIVE_FD = 2,
  FDAS_CONV_OLS_FD = 3,
} FdasConv;

typedef enum FdasHm {
  FDAS_HM_SINGLE = 0,
  FDAS_HM_NAIVE_MULTI = 1,
  FDAS_HM_MULTI_N = 2,
  FDAS_HM_MULTI_R = 3,
} FdasHm;

typedef enum FdasScheme {
  FDAS_SCHEME_SINGLE_INPUT = 0,
  FDAS_SCHEME_MULTI_INPUT = 1,
  FDAS_SCHEME_MULTI_CONFIG = 2,
} FdasScheme;

typedef enum FdasStatus {
  FDAS_STATUS_OK = 0,
  FDAS_STATUS_NULL_ARGUMENT = 1,
  FDAS_STATUS_INVALID_ARGUMENT = 2,
  FDAS_STATUS_PARSE = 3,
  FDAS_STATUS_IO = 4,
  FDAS_STATUS_STRUCTURE = 5,
  FDAS_STATUS_UNSUPPORTED = 6,
  FDAS_STATUS_BUFFER_TOO_SMALL = 7,
  FDAS_STATUS_PANIC = 8,
} FdasStatus;

typedef struct FdasConfigHandle FdasConfigHandle;

typedef struct FdasResult FdasResult;

typedef struct FdasSeries FdasSeries;

typedef struct FdasInjection {
  size_t channel;
  size_t harmonics;
  double amplitude;
} FdasInjection;

/**
 * Zero in `conv_param`, `hm_cols` or `hm_ppi` picks the library default;
 * zero threads means all cores.
 */
typedef struct FdasRunOptions {
  enum FdasConv conv;
  size_t conv_param;
  uint8_t engines;
  enum FdasHm hm;
  size_t hm_cols;
  size_t hm_ppi;
  size_t filters_per_launch;
  size_t threads;
  float threshold_factor;
} FdasRunOptions;

typedef struct FdasCandidate {
  uint32_t harmonic;
  int32_t template_;
  uint32_t channel;
  float power;
} FdasCandidate;

/**
 * Stage latencies in milliseconds.
 */
typedef struct FdasStageTimes {
  double t_ft;
  double t_fop;
  double t_hm;
} FdasStageTimes;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *fdas_last_error(void);

enum FdasStatus fdas_config_desk(struct FdasConfigHandle **out);

/**
 * Full-scale defaults overridden by the keys present in `json`.
 */
enum FdasStatus fdas_config_from_json(const char *json, struct FdasConfigHandle **out);

enum FdasStatus fdas_config_dims(const struct FdasConfigHandle *cfg,
                                 size_t *n_temp,
                                 size_t *n_chan,
                                 size_t *n_hp,
                                 size_t *n_cand);

void fdas_config_free(struct FdasConfigHandle *cfg);

/**
 * Synthetic input: Gaussian noise of deviation `noise` plus the given
 * injections. `injections` may be null when `n_injections` is zero.
 */
enum FdasStatus fdas_series_generate(const struct FdasConfigHandle *cfg,
                                     const struct FdasInjection *injections,
                                     size_t n_injections,
                                     double noise,
                                     uint64_t seed,
                                     struct FdasSeries **out);

/**
 * Copies `len` complex samples stored as interleaved (re, im) pairs.
 */
enum FdasStatus fdas_series_from_interleaved(const float *data,
                                             size_t len,
                                             struct FdasSeries **out);

size_t fdas_series_len(const struct FdasSeries *series);

void fdas_series_free(struct FdasSeries *series);

struct FdasRunOptions fdas_run_options_default(void);

/**
 * Convolves `series` with the synthetic template bank, prepares the plane
 * and harmonic-sums it. `opts` may be null for the defaults.
 */
enum FdasStatus fdas_run(const struct FdasConfigHandle *cfg,
                         const struct FdasSeries *series,
                         const struct FdasRunOptions *opts,
                         struct FdasResult **out);

size_t fdas_result_candidate_count(const struct FdasResult *res);

/**
 * Copies candidates in canonical order (harmonic, then power descending,
 * channel and template ascending). `*written` receives the total count even
 * when `cap` is too small.
 */
enum FdasStatus fdas_result_candidates(const struct FdasResult *res,
                                       struct FdasCandidate *buf,
                                       size_t cap,
                                       size_t *written);

/**
 * Template-major FOP, row 0 being the most negative template.
 */
enum FdasStatus fdas_result_fop(const struct FdasResult *res,
                                float *buf,
                                size_t cap,
                                size_t *n_temp,
                                size_t *n_chan);

enum FdasStatus fdas_result_timing(const struct FdasResult *res, struct FdasStageTimes *out);

void fdas_result_free(struct FdasResult *res);

enum FdasStatus fdas_model_total_latency(const struct FdasStageTimes *t, double *out);

/**
 * Buffer depth (1, 2 or 3) the model picks for these stages.
 */
enum FdasStatus fdas_model_choose_buffering(const struct FdasStageTimes *t, uint32_t *depth);

enum FdasStatus fdas_model_ideal_period(const struct FdasStageTimes *t,
                                        uint32_t depth,
                                        double *out);

/**
 * Period under shared-memory contention on the default device, with every
 * stage demanding the full device bandwidth scaled by `demand`.
 */
enum FdasStatus fdas_model_contended_period(const struct FdasStageTimes *t,
                                            uint32_t depth,
                                            const struct FdasStageTimes *demand,
                                            double *out);

enum FdasStatus fdas_model_multi_device_period(const struct FdasStageTimes *t,
                                               size_t n_devices,
                                               enum FdasScheme scheme,
                                               double handoff_ms,
                                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FDAS_H */
