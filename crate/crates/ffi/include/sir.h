#ifndef SIR_H
#define SIR_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum SirStatus {
  SIR_STATUS_OK = 0,
  SIR_STATUS_NULL_POINTER = 1,
  SIR_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The point or pixel cannot be mapped, e.g. it lies behind the camera.
   */
  SIR_STATUS_GEOMETRY = 3,
  SIR_STATUS_OUT_OF_RANGE = 4,
  SIR_STATUS_OVERFLOW = 5,
  /**
   * An internal failure was caught at the boundary.
   */
  SIR_STATUS_INTERNAL = 6,
} SirStatus;

/**
 * Opaque camera handle.
 */
typedef struct SirCamera SirCamera;

/**
 * Opaque handle to the cameras of a grid recapture.
 */
typedef struct SirRecaptureSet SirRecaptureSet;

/**
 * Pinhole intrinsics with two radial distortion coefficients.
 */
typedef struct SirIntrinsics {
  double fx;
  double fy;
  double cx;
  double cy;
  double k1;
  double k2;
} SirIntrinsics;

/**
 * Placement of a sub-image in its native image. `grid_col` and `grid_row`
 * are -1 for free-form regions.
 */
typedef struct SirSubImage {
  uint32_t origin_x;
  uint32_t origin_y;
  uint32_t width;
  uint32_t height;
  int32_t grid_col;
  int32_t grid_row;
} SirSubImage;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none failed.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *sir_last_error_message(void);

/**
 * Creates a camera from intrinsics, a world-to-camera rotation quaternion
 * `(w, x, y, z)`, a translation and an image size.
 *
 * # Safety
 * `intrinsics`, `quaternion` (4 doubles), `translation` (3 doubles) and
 * `out` must be valid pointers.
 */
enum SirStatus sir_camera_new(const struct SirIntrinsics *intrinsics,
                              const double *quaternion,
                              const double *translation,
                              uint32_t width,
                              uint32_t height,
                              struct SirCamera **out);

/**
 * Releases a camera. Null is ignored.
 *
 * # Safety
 * `camera` must be null or a handle not yet freed.
 */
void sir_camera_free(struct SirCamera *camera);

/**
 * Reads intrinsics and image size of a camera.
 *
 * # Safety
 * `camera` must be a live handle; `intrinsics`, `width` and `height` valid pointers.
 */
enum SirStatus sir_camera_describe(const struct SirCamera *camera,
                                   struct SirIntrinsics *intrinsics,
                                   uint32_t *width,
                                   uint32_t *height);

/**
 * Projects a world point to continuous pixel coordinates.
 *
 * # Safety
 * `camera` must be a live handle; `point` three doubles; `u` and `v` valid pointers.
 */
enum SirStatus sir_camera_project(const struct SirCamera *camera,
                                  const double *point,
                                  double *u,
                                  double *v);

/**
 * Back-projects pixel `(u, v)` at `depth` along the optical axis to a world point.
 *
 * # Safety
 * `camera` must be a live handle and `point` room for three doubles.
 */
enum SirStatus sir_camera_unproject(const struct SirCamera *camera,
                                    double u,
                                    double v,
                                    double depth,
                                    double *point);

/**
 * Camera of the native region with the given origin and size.
 *
 * # Safety
 * `camera` must be a live handle and `out` a valid pointer.
 */
enum SirStatus sir_recapture_region(const struct SirCamera *camera,
                                    uint32_t origin_x,
                                    uint32_t origin_y,
                                    uint32_t width,
                                    uint32_t height,
                                    struct SirCamera **out);

/**
 * Splits a camera into a `cols` x `rows` grid of sub-image cameras.
 *
 * # Safety
 * `camera` must be a live handle and `out` a valid pointer.
 */
enum SirStatus sir_recapture_grid(const struct SirCamera *camera,
                                  uint32_t cols,
                                  uint32_t rows,
                                  struct SirRecaptureSet **out);

/**
 * Number of sub-images in a set, or 0 for null.
 *
 * # Safety
 * `set` must be null or a live handle.
 */
size_t sir_recapture_set_len(const struct SirRecaptureSet *set);

/**
 * Placement and a new camera handle for sub-image `index` (row-major).
 * Either output may be null when not wanted.
 *
 * # Safety
 * `set` must be a live handle; non-null outputs must be valid pointers.
 */
enum SirStatus sir_recapture_set_get(const struct SirRecaptureSet *set,
                                     size_t index,
                                     struct SirSubImage *info,
                                     struct SirCamera **camera);

/**
 * Releases a recapture set. Null is ignored.
 *
 * # Safety
 * `set` must be null or a handle not yet freed.
 */
void sir_recapture_set_free(struct SirRecaptureSet *set);

/**
 * Bytes of an uncompressed image buffer.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SirStatus sir_image_bytes(uint64_t width,
                               uint64_t height,
                               uint64_t channels,
                               uint64_t bytes_per_sample,
                               uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIR_H */
