#ifndef SLSADA_H
#define SLSADA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// When the similarity graph is refreshed from the embedding.
typedef enum SlsadaGraphSchedule {
  SLSADA_GRAPH_SCHEDULE_REBUILD = 0,
  SLSADA_GRAPH_SCHEDULE_FROZEN = 1,
} SlsadaGraphSchedule;

// Outcome of a fallible call. Matches the CLI exit-code convention.
typedef enum SlsadaStatus {
  SLSADA_STATUS_OK = 0,
  SLSADA_STATUS_USAGE_ERROR = 2,
  SLSADA_STATUS_DATA_ERROR = 3,
  SLSADA_STATUS_NUMERICAL_ERROR = 4,
  SLSADA_STATUS_NULL_ARGUMENT = 5,
  SLSADA_STATUS_PANIC = 6,
} SlsadaStatus;

// Opaque source/target pair handle.
typedef struct SlsadaPair SlsadaPair;

// Opaque result handle.
typedef struct SlsadaResult SlsadaResult;

// Solver hyperparameters; obtain defaults from [`slsada_config_small`] or
// [`slsada_config_large`] and override fields as needed.
typedef struct SlsadaConfig {
  uintptr_t subspace_dim;
  double clustering_weight;
  double scale_regularizer;
  uintptr_t iterations;
  uintptr_t inner_updates;
  uintptr_t neighbor_count;
  double epsilon;
  enum SlsadaGraphSchedule graph_schedule;
  uint64_t seed;
  bool conditional_alignment;
} SlsadaConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string; do not free.
const char *slsada_version(void);

// Description of the last failure on this thread; valid until the next
// failing call on the same thread. Do not free.
const char *slsada_last_error_message(void);

// Defaults for small benchmarks (k=20, lambda=0.05).
struct SlsadaConfig slsada_config_small(void);

// Defaults for large many-category datasets (k=100, lambda=0.1).
struct SlsadaConfig slsada_config_large(void);

// Builds a pair from dense row-major feature buffers.
//
// `labeled_indices[i]` is a source column (0-based, caller's order) whose
// class is `labeled_classes[i]`. `true_source` / `true_target` may be NULL;
// when given they enable the accuracy fields of the result.
//
// # Safety
// All non-NULL pointers must reference readable buffers of the documented
// lengths: features `feature_dim * count`, labeled arrays `labeled_count`,
// truth arrays `source_count` / `target_count`.
enum SlsadaStatus slsada_pair_create(uintptr_t feature_dim,
                                     uintptr_t source_count,
                                     const double *source,
                                     uintptr_t target_count,
                                     const double *target,
                                     uintptr_t class_count,
                                     uintptr_t labeled_count,
                                     const uintptr_t *labeled_indices,
                                     const uintptr_t *labeled_classes,
                                     const uintptr_t *true_source,
                                     const uintptr_t *true_target,
                                     struct SlsadaPair **out);

// Frees a pair handle; NULL is ignored.
//
// # Safety
// `pair` must have been returned by [`slsada_pair_create`] and not freed.
void slsada_pair_free(struct SlsadaPair *pair);

// Runs the solver; on success `*out` owns the result.
//
// # Safety
// `pair` and `config` must be valid, `out` writable.
enum SlsadaStatus slsada_run(const struct SlsadaPair *pair,
                             const struct SlsadaConfig *config,
                             struct SlsadaResult **out);

// Number of source samples covered by the result.
//
// # Safety
// `result` must be a live handle from [`slsada_run`].
uintptr_t slsada_result_source_count(const struct SlsadaResult *result);

// Number of target samples covered by the result.
//
// # Safety
// `result` must be a live handle from [`slsada_run`].
uintptr_t slsada_result_target_count(const struct SlsadaResult *result);

// Entries in the objective trace (initialization plus one per iteration).
//
// # Safety
// `result` must be a live handle from [`slsada_run`].
uintptr_t slsada_result_trace_len(const struct SlsadaResult *result);

// Copies hard source labels (clamped labeled samples plus predictions) in
// the caller's original sample order.
//
// # Safety
// `buffer` must hold at least `len` writable entries.
enum SlsadaStatus slsada_result_copy_source_labels(const struct SlsadaResult *result,
                                                   uint32_t *buffer,
                                                   uintptr_t len);

// Copies hard target predictions.
//
// # Safety
// `buffer` must hold at least `len` writable entries.
enum SlsadaStatus slsada_result_copy_target_labels(const struct SlsadaResult *result,
                                                   uint32_t *buffer,
                                                   uintptr_t len);

// Copies the objective trace.
//
// # Safety
// `buffer` must hold at least `len` writable doubles.
enum SlsadaStatus slsada_result_copy_objective_trace(const struct SlsadaResult *result,
                                                     double *buffer,
                                                     uintptr_t len);

// Whole-source accuracy, or NaN when true labels were not supplied.
//
// # Safety
// `result` must be a live handle from [`slsada_run`].
double slsada_result_source_accuracy(const struct SlsadaResult *result);

// Target accuracy, or NaN when true labels were not supplied.
//
// # Safety
// `result` must be a live handle from [`slsada_run`].
double slsada_result_target_accuracy(const struct SlsadaResult *result);

// Frees a result handle; NULL is ignored.
//
// # Safety
// `result` must have been returned by [`slsada_run`] and not freed.
void slsada_result_free(struct SlsadaResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLSADA_H */
