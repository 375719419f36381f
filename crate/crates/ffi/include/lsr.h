#ifndef LSR_H
#define LSR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum LsrStatus {
  LSR_STATUS_OK = 0,
  LSR_STATUS_NULL_POINTER = 1,
  LSR_STATUS_INVALID_ARGUMENT = 2,
  LSR_STATUS_DIMENSION = 3,
  LSR_STATUS_CONFIGURATION = 4,
  LSR_STATUS_TRAINING = 5,
  LSR_STATUS_FORMAT = 6,
  LSR_STATUS_IO = 7,
  LSR_STATUS_UNKNOWN_METHOD = 8,
  LSR_STATUS_BUFFER_TOO_SMALL = 9,
  LSR_STATUS_PANIC = 10,
} LsrStatus;

/**
 * Opaque handle to a loaded model.
 */
typedef struct LsrModelHandle LsrModelHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Load a model file. On success `*out` owns a handle that must be released
 * with [`lsr_model_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum LsrStatus lsr_model_load(const char *path, struct LsrModelHandle **out);

/**
 * Release a handle. Null is ignored.
 *
 * # Safety
 * `handle` must come from [`lsr_model_load`] and not have been freed.
 */
void lsr_model_free(struct LsrModelHandle *handle);

/**
 * Model variant: 1 or 2.
 *
 * # Safety
 * `handle` must be a live handle; `out` must be writable.
 */
enum LsrStatus lsr_model_variant(const struct LsrModelHandle *handle, uint32_t *out);

/**
 * Output scale factor of the model.
 *
 * # Safety
 * `handle` must be a live handle; `out` must be writable.
 */
enum LsrStatus lsr_model_scale(const struct LsrModelHandle *handle, size_t *out);

/**
 * Super-resolve a `height x width` luma image into `out`, which must hold
 * `out_len >= (scale*height) * (scale*width)` values.
 *
 * # Safety
 * `input` must point to `height*width` doubles and `out` to `out_len`.
 */
enum LsrStatus lsr_superresolve(const struct LsrModelHandle *handle,
                                const double *input,
                                size_t height,
                                size_t width,
                                double *out,
                                size_t out_len);

/**
 * PSNR in dB over 8-bit range, ignoring `shave` border pixels. Identical
 * images give +infinity.
 *
 * # Safety
 * `a` and `b` must each point to `height*width` doubles; `out` writable.
 */
enum LsrStatus lsr_psnr(const double *a,
                        const double *b,
                        size_t height,
                        size_t width,
                        size_t shave,
                        double *out);

/**
 * Mean SSIM, ignoring `shave` border pixels.
 *
 * # Safety
 * Same as [`lsr_psnr`].
 */
enum LsrStatus lsr_ssim(const double *a,
                        const double *b,
                        size_t height,
                        size_t width,
                        size_t shave,
                        double *out);

/**
 * Total FLOPs, FLOPs per pixel and parameter count of a built-in method
 * (`aplus`, `srcnn`, `vdsr`, `lsr-v1`, `lsr-v2`) for a `height x width` output.
 * Any of the out pointers may be null.
 *
 * # Safety
 * `method` must be NUL-terminated; non-null out pointers must be writable.
 */
enum LsrStatus lsr_complexity_total(const char *method,
                                    uint64_t height,
                                    uint64_t width,
                                    double *out_flops,
                                    double *out_flops_per_pixel,
                                    uint64_t *out_params);

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *lsr_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LSR_H */
