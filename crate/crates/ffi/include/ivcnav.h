#ifndef IVCNAV_H
#define IVCNAV_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result codes.
 */
typedef enum IvcStatus {
  IVC_STATUS_OK = 0,
  IVC_STATUS_NULL_POINTER = 1,
  IVC_STATUS_INVALID_ARGUMENT = 2,
  IVC_STATUS_IO = 3,
  IVC_STATUS_FORMAT = 4,
  IVC_STATUS_DIMENSION = 5,
  IVC_STATUS_CONFIG = 6,
  IVC_STATUS_INTERNAL = 7,
} IvcStatus;

/**
 * Outcome of localization, mirrors the sidecar `status` field.
 */
typedef enum IvcLocalizeStatus {
  IVC_LOCALIZE_STATUS_LOCATED = 0,
  IVC_LOCALIZE_STATUS_GATED_NEGATIVE = 1,
  IVC_LOCALIZE_STATUS_EMPTY_AFTER_FILTERING = 2,
} IvcLocalizeStatus;

/**
 * Grayscale clip, `t` frames of `h` x `w` (opaque).
 */
typedef struct IvcClip IvcClip;

/**
 * Trained network (opaque).
 */
typedef struct IvcModel IvcModel;

/**
 * Localization output. The annotation fields are zero unless `status` is
 * `Located`.
 */
typedef struct IvcLocalization {
  double logit;
  bool present;
  enum IvcLocalizeStatus status;
  double center_h;
  double center_w;
  double radius;
  size_t n_survivors;
} IvcLocalization;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ivc_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library.
 */
const char *ivc_last_error(void);

/**
 * Loads an NNWF weight file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IvcStatus ivc_model_load(const char *path, struct IvcModel **out);

/**
 * Decodes NNWF bytes.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `out` be a valid pointer.
 */
enum IvcStatus ivc_model_from_bytes(const uint8_t *data, size_t len, struct IvcModel **out);

/**
 * Input dims `[t, h, w]` the model expects.
 *
 * # Safety
 * `model` must come from this library; `dims` must hold three values.
 */
enum IvcStatus ivc_model_input_dims(const struct IvcModel *model, size_t *dims);

/**
 * Sets the candidate count of the localizer.
 *
 * # Safety
 * `model` must come from this library.
 */
enum IvcStatus ivc_model_set_candidates(struct IvcModel *model, size_t n);

/**
 * # Safety
 * `model` must come from this library and not be used afterwards. NULL is
 * ignored.
 */
void ivc_model_free(struct IvcModel *model);

/**
 * Copies `t*h*w` intensities in `[0, 1]`, frame-major, into a new clip.
 *
 * # Safety
 * `data` must point to `t*h*w` floats and `out` be a valid pointer.
 */
enum IvcStatus ivc_clip_from_frames(const float *data,
                                    size_t t,
                                    size_t h,
                                    size_t w,
                                    struct IvcClip **out);

/**
 * Reads a GVID clip file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IvcStatus ivc_clip_load(const char *path, struct IvcClip **out);

/**
 * Decodes GVID bytes.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `out` be a valid pointer.
 */
enum IvcStatus ivc_clip_from_bytes(const uint8_t *data, size_t len, struct IvcClip **out);

/**
 * # Safety
 * `clip` must come from this library and not be used afterwards. NULL is
 * ignored.
 */
void ivc_clip_free(struct IvcClip *clip);

/**
 * Decision logit of `clip`.
 *
 * # Safety
 * Handles must come from this library; `logit` must be a valid pointer.
 */
enum IvcStatus ivc_predict(const struct IvcModel *model, const struct IvcClip *clip, double *logit);

/**
 * Decision plus annotation disc for `clip`.
 *
 * # Safety
 * Handles must come from this library; `out` must be a valid pointer.
 */
enum IvcStatus ivc_localize(const struct IvcModel *model,
                            const struct IvcClip *clip,
                            struct IvcLocalization *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IVCNAV_H */
