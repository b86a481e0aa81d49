#ifndef MESORISK_H
#define MESORISK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MrkStatus {
  MRK_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  MRK_STATUS_NULL_POINTER = 1,
  /**
   * Arguments out of range or inconsistent with each other.
   */
  MRK_STATUS_INVALID_INPUT = 2,
  MRK_STATUS_CONFIG = 3,
  /**
   * Malformed or degenerate data.
   */
  MRK_STATUS_DATA = 4,
  MRK_STATUS_NUMERICAL = 5,
  /**
   * A bug: an internal panic was caught.
   */
  MRK_STATUS_INTERNAL = 6,
} MrkStatus;

/**
 * Sorted simulated portfolio losses.
 */
typedef struct MrkLoss MrkLoss;

/**
 * Calibrated factor model.
 */
typedef struct MrkModel MrkModel;

/**
 * Standardized return panel.
 */
typedef struct MrkPanel MrkPanel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread; empty if none. Valid until
 * the next failing call on the same thread.
 */
const char *mrk_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mrk_version(void);

/**
 * Noise-band edges for an `n_series × n_series` correlation matrix of
 * `n_obs` observations.
 */
enum MrkStatus mrk_mp_bounds(size_t n_series,
                             size_t n_obs,
                             double *lambda_minus,
                             double *lambda_plus);

/**
 * Normalised variation of information between two labelings of `n` nodes.
 */
enum MrkStatus mrk_variation_of_information(const size_t *a,
                                            const size_t *b,
                                            size_t n,
                                            double *out);

/**
 * Standard-normal default threshold for a one-period default probability.
 */
enum MrkStatus mrk_default_threshold(double pd, double *out);

/**
 * Large-homogeneous-portfolio loss quantile.
 */
enum MrkStatus mrk_vasicek_var(double pd, double beta, double alpha, double *out);

/**
 * Copies a row-major `n_obs × n_series` return matrix and standardizes each
 * column. Series are named `S0`, `S1`, ...
 */
enum MrkStatus mrk_panel_new(const double *returns,
                             size_t n_obs,
                             size_t n_series,
                             struct MrkPanel **out);

void mrk_panel_free(struct MrkPanel *panel);

/**
 * Community detection on the filtered correlation matrix. Writes one label
 * per series into `labels` (length `n_series`); `mesoscopic` is false when
 * the filtered matrix carries no group structure.
 */
enum MrkStatus mrk_detect(const struct MrkPanel *panel,
                          uint64_t seed,
                          size_t restarts,
                          size_t *labels,
                          size_t *n_communities,
                          bool *mesoscopic);

/**
 * One-factor model in which every issuer has systematic share `beta`.
 * Issuers are named `I0`, `I1`, ...
 */
enum MrkStatus mrk_model_homogeneous(size_t n_issuers, double beta, struct MrkModel **out);

/**
 * Loads a calibration document written by `mesorisk calibrate`.
 */
enum MrkStatus mrk_model_from_json(const char *json, struct MrkModel **out);

enum MrkStatus mrk_model_n_issuers(const struct MrkModel *model, size_t *out);

void mrk_model_free(struct MrkModel *model);

/**
 * Simulates portfolio losses over `n_paths` paths. Position `i` refers to
 * model issuer `issuers[i]`, or to issuer `i` when `issuers` is null.
 * `pds` are one-period default probabilities used as given. Exposures must
 * sum to 1 (long-only) or 0 (long-short).
 */
enum MrkStatus mrk_simulate(const struct MrkModel *model,
                            const size_t *issuers,
                            const double *exposures,
                            const double *lgds,
                            const double *pds,
                            size_t n_positions,
                            size_t n_paths,
                            uint64_t seed,
                            struct MrkLoss **out);

/**
 * Loss quantile at level `alpha`.
 */
enum MrkStatus mrk_loss_var(const struct MrkLoss *loss, double alpha, double *out);

enum MrkStatus mrk_loss_mean(const struct MrkLoss *loss, double *out);

/**
 * Copies up to `capacity` sorted losses into `buffer` and reports the total
 * number of paths in `n_paths`.
 */
enum MrkStatus mrk_loss_values(const struct MrkLoss *loss,
                               double *buffer,
                               size_t capacity,
                               size_t *n_paths);

void mrk_loss_free(struct MrkLoss *loss);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MESORISK_H */
