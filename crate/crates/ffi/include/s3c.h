#ifndef S3C_H
#define S3C_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define S3C_MUST_LINK 0

#define S3C_CANNOT_LINK 1

#define S3C_MODE_HARD 0

#define S3C_MODE_SOFT 1

#define S3C_METHOD_SSC 0

#define S3C_METHOD_S3C 1

#define S3C_METHOD_CS3C 2

#define S3C_STOP_THETA 0

#define S3C_STOP_COEFFICIENTS 1

#define S3C_STOP_NORM 2

#define S3C_STOP_KMEANS 3

#define S3C_STOP_MAX_ITERS 4

typedef enum S3cStatus {
  S3C_STATUS_OK = 0,
  S3C_STATUS_NULL_POINTER = 1,
  S3C_STATUS_INVALID_INPUT = 2,
  S3C_STATUS_PARSE = 3,
  S3C_STATUS_NUMERICAL = 4,
  S3C_STATUS_INCONSISTENT_SIDE_INFO = 5,
  S3C_STATUS_BUFFER_TOO_SMALL = 6,
  S3C_STATUS_PANIC = 7,
} S3cStatus;

/**
 * Run configuration; starts from library defaults.
 */
typedef struct S3cConfig S3cConfig;

/**
 * Column-major data matrix.
 */
typedef struct S3cData S3cData;

typedef struct S3cResult S3cResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *s3c_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *s3c_version(void);

/**
 * Copies a `rows × cols` column-major matrix; `normalize` scales columns to unit norm.
 *
 * # Safety
 * `values` must point to `rows * cols` doubles; `out` must be writable.
 */
enum S3cStatus s3c_data_new(const double *values,
                            size_t rows,
                            size_t cols,
                            bool normalize,
                            struct S3cData **out);

/**
 * # Safety
 * `data` must be null or a handle from [`s3c_data_new`] not yet freed.
 */
void s3c_data_free(struct S3cData *data);

/**
 * Number of points (columns); 0 for a null handle.
 *
 * # Safety
 * `data` must be null or a live handle.
 */
size_t s3c_data_num_points(const struct S3cData *data);

/**
 * Library defaults: method s3c, hard mode, cluster count unset.
 *
 * # Safety
 * `out` must be writable.
 */
enum S3cStatus s3c_config_new_default(struct S3cConfig **out);

/**
 * Parses a flat JSON configuration; unknown keys are rejected.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum S3cStatus s3c_config_from_json(const char *json, struct S3cConfig **out);

/**
 * # Safety
 * `config` must be null or a live handle.
 */
void s3c_config_free(struct S3cConfig *config);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum S3cStatus s3c_config_set_n_clusters(struct S3cConfig *config, size_t n_clusters);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum S3cStatus s3c_config_set_lambda0(struct S3cConfig *config, double lambda0);

/**
 * Sets α for the currently selected mode.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum S3cStatus s3c_config_set_alpha(struct S3cConfig *config, double alpha);

/**
 * `S3C_MODE_HARD` or `S3C_MODE_SOFT`.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum S3cStatus s3c_config_set_mode(struct S3cConfig *config, int32_t mode);

/**
 * `S3C_METHOD_SSC`, `S3C_METHOD_S3C` or `S3C_METHOD_CS3C`.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum S3cStatus s3c_config_set_method(struct S3cConfig *config, int32_t method);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum S3cStatus s3c_config_set_seed(struct S3cConfig *config, uint64_t seed);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum S3cStatus s3c_config_set_t_max(struct S3cConfig *config, size_t t_max);

/**
 * Clusters the columns of `data`. Constraints are given as parallel arrays
 * of zero-based point indices and link kinds (`S3C_MUST_LINK` /
 * `S3C_CANNOT_LINK`) and require method cs3c.
 *
 * # Safety
 * Handles must be live; each constraint array must hold `n_constraints`
 * elements (they may be null when `n_constraints` is 0); `out` must be writable.
 */
enum S3cStatus s3c_cluster(const struct S3cData *data,
                           const struct S3cConfig *config,
                           const size_t *constraint_i,
                           const size_t *constraint_j,
                           const int32_t *constraint_kind,
                           size_t n_constraints,
                           struct S3cResult **out);

/**
 * # Safety
 * `result` must be null or a live handle.
 */
void s3c_result_free(struct S3cResult *result);

/**
 * # Safety
 * `result` must be null or a live handle.
 */
size_t s3c_result_num_points(const struct S3cResult *result);

/**
 * Outer iterations performed; 0 for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t s3c_result_outer_iterations(const struct S3cResult *result);

/**
 * One of the `S3C_STOP_*` constants; -1 for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
int32_t s3c_result_stop_reason(const struct S3cResult *result);

/**
 * Writes the zero-based labels into `out`, which must hold `len ≥ N` entries.
 *
 * # Safety
 * `result` must be live; `out` must point to `len` writable elements.
 */
enum S3cStatus s3c_result_labels(const struct S3cResult *result, size_t *out, size_t len);

/**
 * Writes the N×N coefficient matrix column-major into `out` (`len ≥ N²`).
 *
 * # Safety
 * `result` must be live; `out` must point to `len` writable elements.
 */
enum S3cStatus s3c_result_coefficients(const struct S3cResult *result, double *out, size_t len);

/**
 * Fraction of points misassigned under the best label matching. Labels are
 * zero-based and below `n_clusters`.
 *
 * # Safety
 * `truth` and `pred` must point to `n` elements; `out` must be writable.
 */
enum S3cStatus s3c_clustering_error(const size_t *truth,
                                    const size_t *pred,
                                    size_t n,
                                    size_t n_clusters,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* S3C_H */
