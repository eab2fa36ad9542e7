#ifndef UTNET_H
#define UTNET_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Attention variant for [`utnet_attention_flops`].
 */
typedef enum UtnetAttention {
  UTNET_ATTENTION_STANDARD = 0,
  UTNET_ATTENTION_EFFICIENT = 1,
} UtnetAttention;

/**
 * Result code of every fallible call.
 */
typedef enum UtnetStatus {
  UTNET_STATUS_OK = 0,
  /**
   * Library failure without a more specific category.
   */
  UTNET_STATUS_INTERNAL = 1,
  /**
   * Invalid configuration or argument value.
   */
  UTNET_STATUS_CONFIG = 2,
  /**
   * Invalid or inconsistent data.
   */
  UTNET_STATUS_DATA = 3,
  UTNET_STATUS_VERIFICATION = 4,
  /**
   * A required pointer argument was null.
   */
  UTNET_STATUS_NULL_POINTER = 5,
  /**
   * A string argument was not valid UTF-8.
   */
  UTNET_STATUS_INVALID_UTF8 = 6,
  /**
   * The library panicked; the handle involved should be discarded.
   */
  UTNET_STATUS_PANIC = 7,
} UtnetStatus;

/**
 * Opaque network handle.
 */
typedef struct UtnetModel UtnetModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *utnet_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *utnet_version(void);

/**
 * Builds a network with the default configuration, initialised from `seed`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum UtnetStatus utnet_model_new_default(uint64_t seed, struct UtnetModel **out);

/**
 * Builds a network from a JSON model configuration (the `model` section of
 * a run configuration).
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out` as above.
 */
enum UtnetStatus utnet_model_from_json(const char *config_json,
                                       uint64_t seed,
                                       struct UtnetModel **out);

/**
 * Loads a checkpoint directory written by training.
 *
 * # Safety
 * `dir` must be a NUL-terminated path; `out` as above.
 */
enum UtnetStatus utnet_model_load(const char *dir, struct UtnetModel **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `model` must be null or a handle from this library not yet freed.
 */
void utnet_model_free(struct UtnetModel *model);

/**
 * Number of trainable scalars.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum UtnetStatus utnet_model_num_params(const struct UtnetModel *model, uint64_t *out);

/**
 * Segments one `size x size` image (row-major, values in [0, 1]) into
 * class labels. The image is standardised exactly as during training.
 *
 * # Safety
 * `image` must hold `size * size` doubles and `labels_out` room for
 * `size * size` bytes.
 */
enum UtnetStatus utnet_model_segment(const struct UtnetModel *model,
                                     const double *image,
                                     size_t size,
                                     uint8_t *labels_out);

/**
 * Generates phantom `seed` for `vendor` (0..=3 for A..D).
 *
 * # Safety
 * `image_out` must have room for `size * size` doubles and `labels_out`
 * for `size * size` bytes; either may be null to skip it.
 */
enum UtnetStatus utnet_synth_generate(uint64_t seed,
                                      uint32_t vendor,
                                      size_t size,
                                      double *image_out,
                                      uint8_t *labels_out);

/**
 * Dice score of `class` between two label maps of `len` pixels.
 *
 * # Safety
 * `pred` and `gt` must hold `len` bytes; `out` must be writable.
 */
enum UtnetStatus utnet_dice(const uint8_t *pred,
                            const uint8_t *gt,
                            size_t len,
                            uint8_t class_,
                            double *out);

/**
 * Symmetric boundary Hausdorff distance (pixels) of `class` between two
 * `h x w` label maps.
 *
 * # Safety
 * `pred` and `gt` must hold `h * w` bytes; `out` must be writable.
 */
enum UtnetStatus utnet_hausdorff(const uint8_t *pred,
                                 const uint8_t *gt,
                                 size_t h,
                                 size_t w,
                                 uint8_t class_,
                                 double *out);

/**
 * Analytic operation count of one attention layer (see the bench module).
 */
double utnet_attention_flops(enum UtnetAttention variant,
                             size_t n,
                             size_t k,
                             size_t d,
                             size_t heads);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UTNET_H */
