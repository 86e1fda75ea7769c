#ifndef COLLUSION_H
#define COLLUSION_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CollusionStatus {
  COLLUSION_STATUS_OK = 0,
  COLLUSION_STATUS_NULL_POINTER = 1,
  COLLUSION_STATUS_INVALID_ARGUMENT = 2,
  COLLUSION_STATUS_DIMENSION_MISMATCH = 3,
  COLLUSION_STATUS_IO = 4,
  COLLUSION_STATUS_PARSE = 5,
  COLLUSION_STATUS_INSUFFICIENT_DATA = 6,
  COLLUSION_STATUS_NUMERICAL = 7,
  COLLUSION_STATUS_BUFFER_TOO_SMALL = 8,
  COLLUSION_STATUS_INTERNAL = 9,
} CollusionStatus;

/**
 * Trained denoising-autoencoder classifier.
 */
typedef struct CollusionDac CollusionDac;

/**
 * Trained anomaly detector (GRU predictor, error model, peak thresholds).
 */
typedef struct CollusionDetector CollusionDetector;

/**
 * Sentence embedder (`hash`, `hash:DIM`, `file:PATH`, `remote:URL`).
 */
typedef struct CollusionEmbedder CollusionEmbedder;

/**
 * Gaussian over prediction-error vectors.
 */
typedef struct CollusionErrorModel CollusionErrorModel;

/**
 * Trained one-class model (ocsvm, iforest, mcd or lof).
 */
typedef struct CollusionOneClass CollusionOneClass;

/**
 * One detected peak. Positions are fractional sample indices.
 */
typedef struct CollusionPeak {
  size_t apex;
  double height;
  double prominence;
  double left;
  double right;
  double width;
  double area;
} CollusionPeak;

typedef struct CollusionNetworkStats {
  size_t nodes;
  size_t edges;
  double average_degree;
  size_t diameter;
  double average_path_length;
  double density;
  double clustering;
} CollusionNetworkStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, NUL-terminated, static.
 */
const char *collusion_version(void);

/**
 * Message of the last failure on this thread. Valid until the next failing
 * call on the same thread; empty if nothing failed yet.
 */
const char *collusion_last_error(void);

/**
 * # Safety
 * `spec` must be a NUL-terminated string; `out` must be writable.
 */
enum CollusionStatus collusion_embedder_new(const char *spec,
                                            uint64_t seed,
                                            struct CollusionEmbedder **out);

/**
 * # Safety
 * `handle` must come from [`collusion_embedder_new`].
 */
enum CollusionStatus collusion_embedder_dim(const struct CollusionEmbedder *handle, size_t *out);

/**
 * Embed one text into `out[0..len]`; `len` must equal the embedder's dim.
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum CollusionStatus collusion_embedder_embed(const struct CollusionEmbedder *handle,
                                              const char *text,
                                              double *out,
                                              size_t len);

/**
 * # Safety
 * `handle` must come from [`collusion_embedder_new`] and not be used after.
 */
void collusion_embedder_free(struct CollusionEmbedder *handle);

/**
 * Fit on `n` row-major error vectors of length `dim`.
 *
 * # Safety
 * `errors` must hold `n * dim` doubles.
 */
enum CollusionStatus collusion_error_model_fit(const double *errors,
                                               size_t n,
                                               size_t dim,
                                               struct CollusionErrorModel **out);

/**
 * Anomaly score of one error vector.
 *
 * # Safety
 * `error` must hold `dim` doubles.
 */
enum CollusionStatus collusion_error_model_score(const struct CollusionErrorModel *handle,
                                                 const double *error,
                                                 size_t dim,
                                                 double *out);

/**
 * # Safety
 * `handle` must come from [`collusion_error_model_fit`].
 */
void collusion_error_model_free(struct CollusionErrorModel *handle);

/**
 * Peaks of `scores`. NaN thresholds mean "no threshold". `*count` always
 * receives the number of peaks; if it exceeds `cap` nothing is written and
 * BUFFER_TOO_SMALL is returned.
 *
 * # Safety
 * `scores` must hold `n` doubles and `out` room for `cap` peaks.
 */
enum CollusionStatus collusion_detect_peaks(const double *scores,
                                            size_t n,
                                            double min_height,
                                            double min_prominence,
                                            double rel_height,
                                            struct CollusionPeak *out,
                                            size_t cap,
                                            size_t *count);

/**
 * Load a detector written by `collusion train-anomaly`.
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum CollusionStatus collusion_detector_load(const char *path, struct CollusionDetector **out);

/**
 * Score a per-bin count series (binned as the detector was trained).
 * Scores align with positions `first_position ..`. `*written` receives the
 * score count even when `cap` is too small.
 *
 * # Safety
 * `counts` must hold `n` doubles and `scores` room for `cap`.
 */
enum CollusionStatus collusion_detector_score(const struct CollusionDetector *handle,
                                              const double *counts,
                                              size_t n,
                                              double *scores,
                                              size_t cap,
                                              size_t *written,
                                              size_t *first_position);

/**
 * Peaks of a count series under the detector's calibrated thresholds, in
 * series positions.
 *
 * # Safety
 * As [`collusion_detector_score`].
 */
enum CollusionStatus collusion_detector_peaks(const struct CollusionDetector *handle,
                                              const double *counts,
                                              size_t n,
                                              struct CollusionPeak *out,
                                              size_t cap,
                                              size_t *count);

/**
 * # Safety
 * `handle` must come from [`collusion_detector_load`].
 */
void collusion_detector_free(struct CollusionDetector *handle);

/**
 * Load a model written by `collusion train --task comments`.
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum CollusionStatus collusion_dac_load(const char *path, struct CollusionDac **out);

/**
 * # Safety
 * `handle` must come from [`collusion_dac_load`].
 */
enum CollusionStatus collusion_dac_input_dim(const struct CollusionDac *handle, size_t *out);

/**
 * Class probabilities `[collusive, other]` of a raw feature vector.
 *
 * # Safety
 * `features` must hold `dim` doubles and `probs` room for 2.
 */
enum CollusionStatus collusion_dac_predict(const struct CollusionDac *handle,
                                           const double *features,
                                           size_t dim,
                                           double *probs);

/**
 * # Safety
 * `handle` must come from [`collusion_dac_load`].
 */
void collusion_dac_free(struct CollusionDac *handle);

/**
 * Load a one-class model. The file holds either one model or an array of
 * models (as written by `collusion train`), in which case `index` picks one.
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum CollusionStatus collusion_one_class_load(const char *path,
                                              size_t index,
                                              struct CollusionOneClass **out);

/**
 * Score (higher is more inlier-like) and inlier decision.
 *
 * # Safety
 * `features` must hold `dim` doubles.
 */
enum CollusionStatus collusion_one_class_score(const struct CollusionOneClass *handle,
                                               const double *features,
                                               size_t dim,
                                               double *score,
                                               bool *is_inlier);

/**
 * # Safety
 * `handle` must come from [`collusion_one_class_load`].
 */
void collusion_one_class_free(struct CollusionOneClass *handle);

/**
 * Statistics of the giant component of an undirected graph given as an
 * edge list, one `a b` pair per line.
 *
 * # Safety
 * `edge_list` must be a NUL-terminated string.
 */
enum CollusionStatus collusion_network_stats(const char *edge_list,
                                             struct CollusionNetworkStats *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COLLUSION_H */
