#ifndef GAZEATT_H
#define GAZEATT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

// Synthetic data domains.
typedef enum GazeattDomain {
  GAZEATT_DOMAIN_GAZE_FOLLOW = 0,
  GAZEATT_DOMAIN_EYEDIAP = 1,
  GAZEATT_DOMAIN_SYN_HEAD = 2,
  GAZEATT_DOMAIN_MMDB = 3,
} GazeattDomain;

// Result of every fallible call.
typedef enum GazeattStatus {
  GAZEATT_STATUS_OK = 0,
  GAZEATT_STATUS_NULL_POINTER = 1,
  GAZEATT_STATUS_INVALID_ARGUMENT = 2,
  GAZEATT_STATUS_IO = 3,
  GAZEATT_STATUS_PARSE = 4,
  GAZEATT_STATUS_CONFIG = 5,
  GAZEATT_STATUS_CHECKPOINT = 6,
  GAZEATT_STATUS_UNDEFINED = 7,
  GAZEATT_STATUS_NON_FINITE = 8,
  GAZEATT_STATUS_PANIC = 9,
} GazeattStatus;

// An in-memory synthetic corpus.
typedef struct GazeattCorpus GazeattCorpus;

// A trained model loaded from a checkpoint.
typedef struct GazeattModel GazeattModel;

// Summary of one inference.
typedef struct GazeattEstimate {
  double yaw_deg;
  double pitch_deg;
  // Probability that the gaze target lies inside the frame.
  double likelihood;
  // Row-major index of the most probable heatmap cell.
  uint32_t argmax_cell;
  // Heatmap side; the heatmap has `grid * grid` cells.
  uint32_t grid;
} GazeattEstimate;

// Labels of one generated sample. Absent labels have their `has_` flag
// cleared and zeroed values.
typedef struct GazeattSampleInfo {
  // Normalized `x, y, w, h`.
  double face_bbox[4];
  bool has_angle;
  double yaw_deg;
  double pitch_deg;
  bool has_target;
  double target[2];
  // 1 inside, 0 outside, -1 unlabelled.
  int32_t inside;
} GazeattSampleInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or an empty string. The
// pointer stays valid until the next failing call on the same thread.
const char *gazeatt_last_error(void);

// Library version as a static NUL-terminated string.
const char *gazeatt_version(void);

// Loads a checkpoint written by `gazeatt train`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum GazeattStatus gazeatt_model_load(const char *path, struct GazeattModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must come from [`gazeatt_model_load`] and not be freed twice.
void gazeatt_model_free(struct GazeattModel *model);

// Heatmap side of a loaded model.
//
// # Safety
// `model` must be a live handle and `grid` writable.
enum GazeattStatus gazeatt_model_heatmap_grid(const struct GazeattModel *model, uint32_t *grid);

// Runs the model on one RGB scene.
//
// `rgb` holds `width * height * 3` bytes, row-major, no padding.
// `face_bbox` points to normalized `x, y, w, h`. When `heatmap` is not null
// the fixation map (heatmap scaled by the likelihood) is written to it;
// `heatmap_len` must then be at least `grid * grid`.
//
// # Safety
// All pointers must be valid for the sizes given.
enum GazeattStatus gazeatt_model_infer(const struct GazeattModel *model,
                                       const uint8_t *rgb,
                                       uint32_t width,
                                       uint32_t height,
                                       const double *face_bbox,
                                       struct GazeattEstimate *out,
                                       double *heatmap,
                                       uintptr_t heatmap_len);

// Area under the ROC curve of `scores` against 0/1 `labels`.
//
// # Safety
// `scores` and `labels` must hold `n` values; `auc` must be writable.
enum GazeattStatus gazeatt_roc_auc(const double *scores,
                                   const uint8_t *labels,
                                   uintptr_t n,
                                   double *auc);

// Average precision of fixation likelihoods against 0/1 inside labels.
//
// # Safety
// `likelihoods` and `labels` must hold `n` values; `ap` must be writable.
enum GazeattStatus gazeatt_fixation_ap(const double *likelihoods,
                                       const uint8_t *labels,
                                       uintptr_t n,
                                       double *ap);

// Generates `count` samples of `domain` with default generator settings.
//
// # Safety
// `out` must be writable.
enum GazeattStatus gazeatt_corpus_generate(enum GazeattDomain domain,
                                           uint64_t seed,
                                           uintptr_t count,
                                           struct GazeattCorpus **out);

// Number of samples in a corpus.
//
// # Safety
// `corpus` must be a live handle and `len` writable.
enum GazeattStatus gazeatt_corpus_len(const struct GazeattCorpus *corpus, uintptr_t *len);

// Labels of sample `index`.
//
// # Safety
// `corpus` must be a live handle and `info` writable.
enum GazeattStatus gazeatt_corpus_sample(const struct GazeattCorpus *corpus,
                                         uintptr_t index,
                                         struct GazeattSampleInfo *info);

// Writes images, manifest and in/out sidecar under `dir`.
//
// # Safety
// `corpus` must be a live handle and `dir` a NUL-terminated string.
enum GazeattStatus gazeatt_corpus_write(const struct GazeattCorpus *corpus, const char *dir);

// Releases a corpus. Null is ignored.
//
// # Safety
// `corpus` must come from [`gazeatt_corpus_generate`] and not be freed twice.
void gazeatt_corpus_free(struct GazeattCorpus *corpus);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAZEATT_H */
