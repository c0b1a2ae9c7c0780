#ifndef ROICT_H
#define ROICT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RoictStatus {
  ROICT_STATUS_OK = 0,
  ROICT_STATUS_NULL_POINTER = 1,
  ROICT_STATUS_IO = 2,
  ROICT_STATUS_FORMAT = 3,
  ROICT_STATUS_CONFIG = 4,
  ROICT_STATUS_INVALID_PARAM = 5,
  ROICT_STATUS_INVALID_GEOMETRY = 6,
  ROICT_STATUS_STEP_SIZE = 7,
  ROICT_STATUS_SHAPE = 8,
  ROICT_STATUS_PANIC = 9,
} RoictStatus;

typedef enum RoictMethod {
  ROICT_METHOD_FBP = 0,
  ROICT_METHOD_TV_HIER = 1,
  ROICT_METHOD_RDBFB = 2,
  ROICT_METHOD_UNROLLED = 3,
} RoictMethod;

/**
 * Parsed run configuration (geometry, stencil and solver settings).
 */
typedef struct RoictConfig RoictConfig;

/**
 * Scanner geometry: image lattice, support and ROI disks, detector and
 * angles.
 */
typedef struct RoictGeometry RoictGeometry;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *roict_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *roict_last_error(void);

/**
 * Create a geometry. Lengths are in the same unit; diameters are those of
 * the reconstruction support and of the ROI.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum RoictStatus roict_geometry_new(size_t width,
                                    double pixel_size,
                                    double grid_diameter,
                                    double roi_diameter,
                                    size_t n_bins,
                                    double bin_size,
                                    size_t n_angles,
                                    size_t subrays,
                                    struct RoictGeometry **out);

/**
 * # Safety
 * `g` must be NULL or a handle from [`roict_geometry_new`] not yet freed.
 */
void roict_geometry_free(struct RoictGeometry *g);

/**
 * Number of image values (`width²`).
 *
 * # Safety
 * `g` must be a valid geometry handle.
 */
size_t roict_geometry_image_len(const struct RoictGeometry *g);

/**
 * Number of sinogram values (`n_angles · n_bins`).
 *
 * # Safety
 * `g` must be a valid geometry handle.
 */
size_t roict_geometry_sinogram_len(const struct RoictGeometry *g);

/**
 * Projection of the support-restricted image.
 *
 * # Safety
 * `image` must hold `image_len` values and `out` `out_len` writable values.
 */
enum RoictStatus roict_project(const struct RoictGeometry *g,
                               const double *image,
                               size_t image_len,
                               double *out,
                               size_t out_len);

/**
 * Adjoint of [`roict_project`].
 *
 * # Safety
 * `sino` must hold `sino_len` values and `out` `out_len` writable values.
 */
enum RoictStatus roict_backproject(const struct RoictGeometry *g,
                                   const double *sino,
                                   size_t sino_len,
                                   double *out,
                                   size_t out_len);

/**
 * Filtered backprojection.
 *
 * # Safety
 * `sino` must hold `sino_len` values and `out` `out_len` writable values.
 */
enum RoictStatus roict_fbp(const struct RoictGeometry *g,
                           const double *sino,
                           size_t sino_len,
                           double *out,
                           size_t out_len);

/**
 * Parse a TOML run configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated UTF-8 string and `out` writable.
 */
enum RoictStatus roict_config_from_toml(const char *toml, struct RoictConfig **out);

/**
 * # Safety
 * `c` must be NULL or a handle from [`roict_config_from_toml`] not yet freed.
 */
void roict_config_free(struct RoictConfig *c);

/**
 * Geometry described by a configuration, as a new handle.
 *
 * # Safety
 * `c` must be a valid configuration handle and `out` writable.
 */
enum RoictStatus roict_config_geometry(const struct RoictConfig *c, struct RoictGeometry **out);

/**
 * Reconstruct the support image from a sinogram with `method`. Step sizes
 * that fail validation are rejected unless `override_steps` is nonzero.
 *
 * # Safety
 * `sino` must hold `sino_len` values and `out` `out_len` writable values.
 */
enum RoictStatus roict_reconstruct(const struct RoictConfig *c,
                                   enum RoictMethod method,
                                   const double *sino,
                                   size_t sino_len,
                                   int32_t override_steps,
                                   double *out,
                                   size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROICT_H */
