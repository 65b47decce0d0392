#ifndef TICOLOR_H
#define TICOLOR_H

/* Generated by cbindgen from the ticolor-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call in this interface.
 */
typedef enum TicolorStatus {
  /**
   * Success.
   */
  TICOLOR_STATUS_OK = 0,
  /**
   * Bad configuration or argument value.
   */
  TICOLOR_STATUS_USAGE = 1,
  /**
   * File I/O or decode failure.
   */
  TICOLOR_STATUS_IO = 2,
  /**
   * Dataset, shape, or degenerate-input failure.
   */
  TICOLOR_STATUS_DATA = 3,
  /**
   * Checkpoint missing, corrupt, or incompatible.
   */
  TICOLOR_STATUS_CHECKPOINT = 4,
  /**
   * Numeric failure.
   */
  TICOLOR_STATUS_NUMERIC = 5,
  /**
   * A required pointer argument was null.
   */
  TICOLOR_STATUS_NULL_ARGUMENT = 6,
  /**
   * An internal panic was caught at the boundary.
   */
  TICOLOR_STATUS_PANIC = 7,
} TicolorStatus;

/**
 * A loaded generator bound to a compute device.
 */
typedef struct TicolorGenerator TicolorGenerator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the message for the most recent failure on this thread into
 * `buf` (NUL-terminated, truncated to `cap`). Returns the full message
 * length in bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must point to at least `cap` writable bytes, or be null (then
 * only the length is returned).
 */
uintptr_t ticolor_last_error(char *buf, uintptr_t cap);

/**
 * Load the generator from a training checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string; `out` must be a valid
 * pointer to receive the handle.
 */
enum TicolorStatus ticolor_generator_load(const char *path, struct TicolorGenerator **out);

/**
 * Release a generator handle. Null is ignored.
 *
 * # Safety
 * `handle` must come from [`ticolor_generator_load`] and not be freed
 * twice.
 */
void ticolor_generator_free(struct TicolorGenerator *handle);

/**
 * Colorize one thermal image.
 *
 * `thermal` holds `width * height` grayscale bytes; `rgb_out` receives
 * `3 * width * height` interleaved RGB bytes. Dimensions of any size
 * >= 17 pixels per side are accepted (padded internally).
 *
 * # Safety
 * `handle` must be a live generator handle; the buffers must have the
 * stated sizes.
 */
enum TicolorStatus ticolor_colorize(const struct TicolorGenerator *handle,
                                    const uint8_t *thermal,
                                    uintptr_t width,
                                    uintptr_t height,
                                    uint8_t *rgb_out);

/**
 * Peak signal-to-noise ratio in dB over 8-bit interleaved images.
 * Identical inputs yield +infinity.
 *
 * # Safety
 * Buffers must hold `channels * width * height` bytes; `out` must be a
 * valid pointer.
 */
enum TicolorStatus ticolor_psnr(const uint8_t *pred,
                                const uint8_t *reference,
                                uintptr_t channels,
                                uintptr_t width,
                                uintptr_t height,
                                double *out);

/**
 * Mean structural similarity (11x11 Gaussian window) on the luma plane.
 *
 * # Safety
 * As for [`ticolor_psnr`]; both sides must be at least 11x11.
 */
enum TicolorStatus ticolor_ssim(const uint8_t *pred,
                                const uint8_t *reference,
                                uintptr_t channels,
                                uintptr_t width,
                                uintptr_t height,
                                double *out);

/**
 * Multi-scale structural similarity; the scale count adapts to image
 * size.
 *
 * # Safety
 * As for [`ticolor_psnr`]; both sides must be at least 11x11.
 */
enum TicolorStatus ticolor_msssim(const uint8_t *pred,
                                  const uint8_t *reference,
                                  uintptr_t channels,
                                  uintptr_t width,
                                  uintptr_t height,
                                  double *out);

/**
 * Noise quality measure in dB.
 *
 * # Safety
 * As for [`ticolor_psnr`]; both sides must be at least 16x16.
 */
enum TicolorStatus ticolor_nqm(const uint8_t *pred,
                               const uint8_t *reference,
                               uintptr_t channels,
                               uintptr_t width,
                               uintptr_t height,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TICOLOR_H */
