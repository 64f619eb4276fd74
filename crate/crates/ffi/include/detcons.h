#ifndef DETCONS_H
#define DETCONS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DetconsStatus {
  DETCONS_STATUS_OK = 0,
  DETCONS_STATUS_NULL_POINTER = 1,
  DETCONS_STATUS_INVALID_ARGUMENT = 2,
  DETCONS_STATUS_PARSE = 3,
  DETCONS_STATUS_INTEGRITY = 4,
  DETCONS_STATUS_CONFIG = 5,
  DETCONS_STATUS_IO = 6,
  DETCONS_STATUS_CODEC = 7,
  DETCONS_STATUS_CONTRACT = 8,
  DETCONS_STATUS_PANIC = 9,
} DetconsStatus;

typedef enum DetconsAssignment {
  DETCONS_ASSIGNMENT_GREEDY = 0,
  DETCONS_ASSIGNMENT_OPTIMAL = 1,
} DetconsAssignment;

/**
 * Parsed correction pipeline.
 */
typedef struct DetconsPipeline DetconsPipeline;

/**
 * Loaded MOT sequence.
 */
typedef struct DetconsSequence DetconsSequence;

/**
 * Pixel box: top-left corner plus size.
 */
typedef struct DetconsBox {
  double left;
  double top;
  double width;
  double height;
} DetconsBox;

typedef struct DetconsMatchConfig {
  double iou_threshold;
  double confidence_threshold;
  double nms_iou_threshold;
  enum DetconsAssignment assignment;
} DetconsMatchConfig;

typedef struct DetconsConsistency {
  /**
   * Meaningful only when `defined` is true.
   */
  double value;
  bool defined;
  size_t defined_pairs;
  size_t skipped_pairs;
} DetconsConsistency;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread, or NULL. Owned by the
 * library.
 */
const char *detcons_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *detcons_version(void);

enum DetconsStatus detcons_iou(const struct DetconsBox *a, const struct DetconsBox *b, double *out);

/**
 * Consistency of one frame pair from id lists: ground truth present in each
 * frame and the subset detected. `*out_defined` is false (and `*out_value`
 * untouched) when the frames share no ids.
 */
enum DetconsStatus detcons_pairwise_consistency(const int64_t *gt_i,
                                                size_t gt_i_len,
                                                const int64_t *gt_j,
                                                size_t gt_j_len,
                                                const int64_t *det_i,
                                                size_t det_i_len,
                                                const int64_t *det_j,
                                                size_t det_j_len,
                                                double *out_value,
                                                bool *out_defined);

struct DetconsMatchConfig detcons_match_config_default(void);

/**
 * Loads a sequence root (seqinfo.ini, gt/gt.txt, det/det.txt).
 */
enum DetconsStatus detcons_sequence_load(const char *root, struct DetconsSequence **out);

/**
 * Frame count, or 0 for NULL.
 */
uint32_t detcons_sequence_frame_count(const struct DetconsSequence *seq);

void detcons_sequence_free(struct DetconsSequence *seq);

/**
 * Video consistency of `seq`. `cfg` may be NULL for defaults.
 */
enum DetconsStatus detcons_video_consistency(const struct DetconsSequence *seq,
                                             const struct DetconsMatchConfig *cfg,
                                             struct DetconsConsistency *out);

/**
 * Full evaluation report of `seq` as JSON. Free `*out_json` with
 * [`detcons_string_free`].
 */
enum DetconsStatus detcons_evaluate_json(const struct DetconsSequence *seq,
                                         const struct DetconsMatchConfig *cfg,
                                         char **out_json);

void detcons_string_free(char *s);

/**
 * Parses a pipeline spec such as `"wc:quality=30,um"`.
 */
enum DetconsStatus detcons_pipeline_parse(const char *spec, struct DetconsPipeline **out);

/**
 * True when detections on the corrected frames must be mirrored back.
 */
bool detcons_pipeline_requires_mirroring(const struct DetconsPipeline *p);

/**
 * Runs the pipeline on packed RGB8 pixels. `input` and `output` each hold
 * `width * height * 3` bytes and may not overlap.
 */
enum DetconsStatus detcons_pipeline_apply_rgb(const struct DetconsPipeline *p,
                                              const uint8_t *input,
                                              uint32_t width,
                                              uint32_t height,
                                              uint8_t *output);

void detcons_pipeline_free(struct DetconsPipeline *p);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DETCONS_H */
