#ifndef SPLIT_FORGE_H
#define SPLIT_FORGE_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every function.
 */
typedef enum SfStatus {
  SF_STATUS_OK = 0,
  SF_STATUS_NULL_POINTER = 1,
  SF_STATUS_INVALID_ARGUMENT = 2,
  SF_STATUS_CONFIG = 3,
  SF_STATUS_IO = 4,
  SF_STATUS_FORMAT = 5,
  SF_STATUS_VALIDATION = 6,
  SF_STATUS_INFEASIBLE = 7,
  SF_STATUS_NUMERICAL = 8,
  SF_STATUS_LLM = 9,
  SF_STATUS_PANIC = 10,
} SfStatus;

/**
 * Grouping strategies, in the order used by the report tables.
 */
typedef enum SfStrategy {
  SF_STRATEGY_RANDOM = 0,
  SF_STRATEGY_LLM = 1,
  SF_STRATEGY_SIMILARITY = 2,
  SF_STRATEGY_CLUSTERING = 3,
  SF_STRATEGY_SUPERCATEGORY = 4,
} SfStrategy;

/**
 * Loaded embeddings, attributes and optional supercategories.
 */
typedef struct SfDataset SfDataset;

/**
 * A partition of the dataset's concepts into groups.
 */
typedef struct SfGrouping SfGrouping;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, empty after a success. The
 * pointer stays valid until the next call into this library on the thread.
 */
const char *sf_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sf_version(void);

/**
 * Loads a dataset. The embeddings format follows the file extension
 * (`.bin`/`.sftn` binary tensor, otherwise CSV). `supercategories_path`
 * may be NULL.
 *
 * # Safety
 * Path arguments must be NUL-terminated strings; `out` must be writable.
 */
enum SfStatus sf_dataset_load(const char *embeddings_path,
                              const char *attributes_path,
                              const char *supercategories_path,
                              struct SfDataset **out);

/**
 * # Safety
 * `ds` must come from [`sf_dataset_load`] and not be used afterwards.
 */
void sf_dataset_free(struct SfDataset *ds);

/**
 * Number of concepts, or 0 for a NULL handle.
 *
 * # Safety
 * `ds` must be NULL or a live handle.
 */
size_t sf_dataset_n_concepts(const struct SfDataset *ds);

/**
 * # Safety
 * `ds` must be NULL or a live handle.
 */
size_t sf_dataset_dim(const struct SfDataset *ds);

/**
 * # Safety
 * `ds` must be NULL or a live handle.
 */
size_t sf_dataset_n_attributes(const struct SfDataset *ds);

/**
 * Copies the labels of attribute `attribute` into `out_labels` (length
 * `n_concepts`).
 *
 * # Safety
 * `ds` must be live; `out_labels` must hold `len` bytes.
 */
enum SfStatus sf_dataset_attribute_labels(const struct SfDataset *ds,
                                          size_t attribute,
                                          uint8_t *out_labels,
                                          size_t len);

/**
 * Builds a grouping with default settings for everything not passed in.
 * `k` is used by clustering, `top_pairs` by similarity, `pairs_path` by the
 * LLM strategy (NULL otherwise).
 *
 * # Safety
 * `ds` must be live; `pairs_path` NULL or NUL-terminated; `out` writable.
 */
enum SfStatus sf_grouping_build(const struct SfDataset *ds,
                                enum SfStrategy strategy,
                                size_t k,
                                size_t top_pairs,
                                uint64_t seed,
                                const char *pairs_path,
                                struct SfGrouping **out);

/**
 * # Safety
 * `g` must come from [`sf_grouping_build`] and not be used afterwards.
 */
void sf_grouping_free(struct SfGrouping *g);

/**
 * # Safety
 * `g` must be NULL or a live handle.
 */
size_t sf_grouping_n_groups(const struct SfGrouping *g);

/**
 * Fraction of concepts in groups of two or more; NaN for a NULL handle.
 *
 * # Safety
 * `g` must be NULL or a live handle.
 */
double sf_grouping_coverage(const struct SfGrouping *g);

/**
 * Writes the group index of every concept into `out_group_of`.
 *
 * # Safety
 * `g` must be live; `out_group_of` must hold `len` elements.
 */
enum SfStatus sf_grouping_group_of(const struct SfGrouping *g, size_t *out_group_of, size_t len);

/**
 * Splits one attribute under default constraints. `out_train_mask[i]` is 1
 * for training concepts. A split that misses a hard constraint is still
 * written, with `*out_feasible` set to false.
 *
 * # Safety
 * `g` must be live; `labels` and `out_train_mask` must hold `n` bytes;
 * `out_penalty` and `out_feasible` must be writable.
 */
enum SfStatus sf_assign_split(const struct SfGrouping *g,
                              const uint8_t *labels,
                              size_t n,
                              uint64_t seed,
                              uint8_t *out_train_mask,
                              double *out_penalty,
                              bool *out_feasible);

/**
 * # Safety
 * `u` and `v` must hold `d` doubles; `out` must be writable.
 */
enum SfStatus sf_cosine_similarity(const double *u, const double *v, size_t d, double *out);

/**
 * K-Means over a row-major `n x d` matrix.
 *
 * # Safety
 * `values` must hold `n * d` doubles, `out_assignment` `n` elements;
 * `out_inertia` must be writable.
 */
enum SfStatus sf_kmeans(const double *values,
                        size_t n,
                        size_t d,
                        size_t k,
                        uint64_t seed,
                        size_t max_iter,
                        size_t *out_assignment,
                        double *out_inertia);

/**
 * # Safety
 * `y_true` and `y_pred` must hold `n` bytes; `out` must be writable.
 */
enum SfStatus sf_f1_score(const uint8_t *y_true, const uint8_t *y_pred, size_t n, double *out);

/**
 * # Safety
 * `x` and `y` must hold `n` doubles; `out` must be writable.
 */
enum SfStatus sf_pearson(const double *x, const double *y, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPLIT_FORGE_H */
