#ifndef MDIS_H
#define MDIS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes.
 */
typedef enum {
  MDIS_STATUS_OK = 0,
  MDIS_STATUS_NULL_POINTER = 1,
  MDIS_STATUS_INVALID_ARGUMENT = 2,
  MDIS_STATUS_INVALID_MODE = 3,
  MDIS_STATUS_IO = 4,
  MDIS_STATUS_UNSUPPORTED_FORMAT = 5,
  MDIS_STATUS_CORRUPT_IMAGE = 6,
  MDIS_STATUS_NO_FIXATIONS = 7,
  MDIS_STATUS_DEGENERATE = 8,
  MDIS_STATUS_INTERNAL = 9,
  MDIS_STATUS_PANIC = 10,
} MdisStatus;

/*
 A normalised saliency map, row-major, values in `[0,1]`.
 */
typedef struct MdisMap MdisMap;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *mdis_version(void);

/*
 Message of the last failed call on this thread, or null. Valid until the
 next call into the library on this thread.
 */
const char *mdis_last_error_message(void);

/*
 Saliency map of a row-major luminance image with values in `[0,1]`.

 # Safety
 `luminance` must point to `width * height` doubles, `mode` to a
 NUL-terminated string and `out` to writable storage for one pointer.
 */
MdisStatus mdis_saliency_from_luminance(const double *luminance,
                                        size_t width,
                                        size_t height,
                                        const char *mode,
                                        MdisMap **out);

/*
 Saliency map of a PNG or PPM file.

 # Safety
 `path` and `mode` must be NUL-terminated strings and `out` writable
 storage for one pointer.
 */
MdisStatus mdis_saliency_from_file(const char *path, const char *mode, MdisMap **out);

/*
 # Safety
 `map` must be null or a live map from this library.
 */
size_t mdis_map_width(const MdisMap *map);

/*
 # Safety
 `map` must be null or a live map from this library.
 */
size_t mdis_map_height(const MdisMap *map);

/*
 Row-major values, `width * height` doubles owned by the map.

 # Safety
 `map` must be null or a live map from this library.
 */
const double *mdis_map_data(const MdisMap *map);

/*
 # Safety
 `map` must be null or a map from this library not yet freed.
 */
void mdis_map_free(MdisMap *map);

/*
 Area under the ROC curve of `map` against fixations `(xs[i], ys[i])`.

 # Safety
 `map` must point to `width * height` doubles, `xs` and `ys` to `n`
 doubles each, and `out` to one writable double.
 */
MdisStatus mdis_auc(const double *map,
                    size_t width,
                    size_t height,
                    const double *xs,
                    const double *ys,
                    size_t n,
                    double *out);

/*
 Normalised scanpath saliency. Returns `MDIS_STATUS_DEGENERATE` with
 `*out = 0` for a constant map.

 # Safety
 As for [`mdis_auc`].
 */
MdisStatus mdis_nss(const double *map,
                    size_t width,
                    size_t height,
                    const double *xs,
                    const double *ys,
                    size_t n,
                    double *out);

/*
 Linear correlation of two maps of equal size. Returns
 `MDIS_STATUS_DEGENERATE` with `*out = 0` if either is constant.

 # Safety
 `a` and `b` must point to `width * height` doubles and `out` to one
 writable double.
 */
MdisStatus mdis_lcc(const double *a, const double *b, size_t width, size_t height, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MDIS_H */
