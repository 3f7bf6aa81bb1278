#ifndef FEATSEL_H
#define FEATSEL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every function.
 */
typedef enum FsStatus {
  FS_STATUS_OK = 0,
  FS_STATUS_NULL_POINTER = 1,
  FS_STATUS_INVALID_UTF8 = 2,
  FS_STATUS_PARSE = 3,
  FS_STATUS_VALIDATION = 4,
  FS_STATUS_STRUCTURE = 5,
  FS_STATUS_ARGUMENT = 6,
  FS_STATUS_CONFIG = 7,
  FS_STATUS_DOMAIN = 8,
  FS_STATUS_IO = 9,
  FS_STATUS_RUN = 10,
  FS_STATUS_BUFFER_TOO_SMALL = 11,
  FS_STATUS_PANIC = 12,
} FsStatus;

/**
 * Opaque dataset handle.
 */
typedef struct FsDataset FsDataset;

/**
 * Opaque Friedman test result.
 */
typedef struct FsFriedman FsFriedman;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *fs_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *fs_version(void);

/**
 * Loads a CSV dataset (header row, class in the last column).
 */
enum FsStatus fs_dataset_load_csv(const char *path, struct FsDataset **out);

/**
 * Releases a dataset. Null is ignored.
 */
void fs_dataset_free(struct FsDataset *ds);

/**
 * Writes sample, feature and class counts. Any output pointer may be null.
 */
enum FsStatus fs_dataset_dims(const struct FsDataset *ds,
                              size_t *n_samples,
                              size_t *n_features,
                              size_t *n_classes);

/**
 * Copies feature `index`'s name into `buf` with a terminating nul.
 * `required` (optional) receives the needed size including the nul; a
 * short buffer yields `FS_STATUS_BUFFER_TOO_SMALL`.
 */
enum FsStatus fs_dataset_feature_name(const struct FsDataset *ds,
                                      size_t index,
                                      char *buf,
                                      size_t buf_len,
                                      size_t *required);

enum FsStatus fs_dataset_export_csv(const struct FsDataset *ds, const char *path);

enum FsStatus fs_dataset_export_arff(const struct FsDataset *ds,
                                     const char *relation,
                                     const char *path);

/**
 * Equal-width discretization into `bins` codes per feature; a new handle.
 */
enum FsStatus fs_dataset_discretize(const struct FsDataset *ds,
                                    size_t bins,
                                    struct FsDataset **out);

/**
 * Keeps the listed feature columns, in the given order; a new handle.
 */
enum FsStatus fs_dataset_reduce(const struct FsDataset *ds,
                                const size_t *indices,
                                size_t n_indices,
                                struct FsDataset **out);

/**
 * Scores every feature with a named method using its default parameters.
 * Larger scores are better. `scores_len` must be at least the feature
 * count. Subset-search methods (mrmr, sfs, sbs, ga) have no score vector
 * and yield `FS_STATUS_ARGUMENT`.
 */
enum FsStatus fs_score(const struct FsDataset *ds,
                       const char *method,
                       uint64_t seed,
                       double *scores,
                       size_t scores_len);

/**
 * Indices of the `k` best scores (larger is better, ties to lower index).
 */
enum FsStatus fs_rank_top_k(const double *scores,
                            size_t n_scores,
                            size_t k,
                            size_t *out_indices,
                            size_t out_len);

/**
 * Friedman test on a row-major `n_datasets x n_methods` matrix. `alphas`
 * may be null with `n_alphas == 0` to use 0.01, 0.05 and 0.1.
 */
enum FsStatus fs_friedman(const double *values,
                          size_t n_datasets,
                          size_t n_methods,
                          int lower_is_better,
                          const double *alphas,
                          size_t n_alphas,
                          struct FsFriedman **out);

void fs_friedman_free(struct FsFriedman *report);

/**
 * Chi-square, Iman-Davenport F (may be +infinity), whether F is infinite,
 * and both degrees of freedom. Any output pointer may be null.
 */
enum FsStatus fs_friedman_statistics(const struct FsFriedman *report,
                                     double *chi_square,
                                     double *f_statistic,
                                     int *f_is_infinite,
                                     size_t *dof1,
                                     size_t *dof2);

/**
 * Copies the average ranks (one per method) into `out`.
 */
enum FsStatus fs_friedman_average_ranks(const struct FsFriedman *report,
                                        double *out,
                                        size_t out_len);

/**
 * Index of the method with the smallest average rank.
 */
enum FsStatus fs_friedman_best_method(const struct FsFriedman *report, size_t *out);

/**
 * Number of significance levels in the report.
 */
enum FsStatus fs_friedman_n_levels(const struct FsFriedman *report, size_t *out);

/**
 * Significance level `index`: alpha, F and chi-square critical values and
 * the verdict (1 significant, 0 not). Any output pointer may be null.
 */
enum FsStatus fs_friedman_level(const struct FsFriedman *report,
                                size_t index,
                                double *alpha,
                                double *f_critical,
                                double *chi_critical,
                                int *significant);

/**
 * Upper-tail critical value of F(d1, d2) at level `alpha`.
 */
enum FsStatus fs_f_critical_value(size_t d1, size_t d2, double alpha, double *out);

/**
 * Upper-tail critical value of chi-square(df) at level `alpha`.
 */
enum FsStatus fs_chi_square_critical_value(size_t df, double alpha, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEATSEL_H */
