#ifndef HOLOFOCUS_H
#define HOLOFOCUS_H

/* Generated from the Rust sources at build time; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HfStatus {
  HF_STATUS_OK = 0,
  HF_STATUS_NULL_POINTER = 1,
  HF_STATUS_INVALID_ARGUMENT = 2,
  HF_STATUS_SHAPE = 3,
  HF_STATUS_NON_FINITE = 4,
  HF_STATUS_DIVERGED = 5,
  HF_STATUS_IO = 6,
  HF_STATUS_BUFFER_TOO_SMALL = 7,
  HF_STATUS_UNAVAILABLE = 8,
  HF_STATUS_PANIC = 9,
  HF_STATUS_INTERNAL = 10,
} HfStatus;

typedef enum HfStrategy {
  HF_STRATEGY_KNOWN = 0,
  HF_STRATEGY_RANDOM = 1,
  HF_STRATEGY_NON_WEIGHTED = 2,
  HF_STRATEGY_ALTERNATING = 3,
  HF_STRATEGY_REVERSE_ATTENTION = 4,
} HfStrategy;

typedef enum HfLossKind {
  HF_LOSS_KIND_GROUND = 0,
  HF_LOSS_KIND_REVERSE_ATTENTION = 1,
  HF_LOSS_KIND_NON_WEIGHTED = 2,
  HF_LOSS_KIND_ALTERNATING = 3,
} HfLossKind;

/**
 * Opaque hologram handle.
 */
typedef struct HfHologram HfHologram;

/**
 * Opaque reconstruction result handle.
 */
typedef struct HfReconstruction HfReconstruction;

/**
 * Settings for [`hf_reconstruct`]; start from [`hf_reconstruct_options_default`].
 */
typedef struct HfReconstructOptions {
  enum HfStrategy strategy;
  /**
   * Candidate index used by [`HfStrategy::Random`].
   */
  size_t random_index;
  size_t epochs;
  uint64_t seed;
  double learning_rate;
  /**
   * Candidate distances `zmin, zmin + zstep, ..., zmax` in meters.
   */
  double zmin;
  double zmax;
  double zstep;
  /**
   * Non-zero selects 64-bit arithmetic.
   */
  int32_t double_precision;
} HfReconstructOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *hf_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hf_version(void);

/**
 * Simulate the in-line hologram of a built-in sample (`bar-target`,
 * `cells`, `dendrite`) or an image file, mean-normalized.
 *
 * # Safety
 * `sample` must be a NUL-terminated string and `out` valid for one write.
 */
enum HfStatus hf_simulate(const char *sample,
                          size_t size,
                          double wavelength,
                          double pixel_pitch,
                          double distance,
                          uint64_t seed,
                          struct HfHologram **out);

/**
 * Wrap a measured intensity (`height * width` values) as a hologram.
 * The intensity is divided by its mean.
 *
 * # Safety
 * `intensity` must be valid for `height * width` reads and `out` for one write.
 */
enum HfStatus hf_hologram_from_intensity(const double *intensity,
                                         size_t height,
                                         size_t width,
                                         double wavelength,
                                         double pixel_pitch,
                                         struct HfHologram **out);

/**
 * # Safety
 * `hologram` must come from this library; the out pointers must be valid.
 */
enum HfStatus hf_hologram_dims(const struct HfHologram *hologram, size_t *height, size_t *width);

/**
 * Copy the (normalized) intensity into `out`.
 *
 * # Safety
 * `hologram` must come from this library and `out` be valid for `len` writes.
 */
enum HfStatus hf_hologram_intensity(const struct HfHologram *hologram, double *out, size_t len);

/**
 * Copy the ground-truth object amplitude; `Unavailable` for measured holograms.
 *
 * # Safety
 * `hologram` must come from this library and `out` be valid for `len` writes.
 */
enum HfStatus hf_hologram_truth_amplitude(const struct HfHologram *hologram,
                                          double *out,
                                          size_t len);

/**
 * # Safety
 * `hologram` must be null or come from this library, and not be used afterwards.
 */
void hf_hologram_free(struct HfHologram *hologram);

/**
 * Desk-scale defaults: reverse-attention, 1500 epochs, seed 0, Adam 1e-3,
 * candidates 4.5 mm to 5.5 mm in 0.1 mm steps, 32-bit.
 */
struct HfReconstructOptions hf_reconstruct_options_default(void);

/**
 * Train the autoencoder on `hologram`. The known-distance strategy needs a
 * simulated hologram whose true distance lies on the candidate grid.
 *
 * # Safety
 * `hologram` must come from this library, `options` be null (defaults) or
 * valid, and `out` valid for one write.
 */
enum HfStatus hf_reconstruct(const struct HfHologram *hologram,
                             const struct HfReconstructOptions *options,
                             struct HfReconstruction **out);

/**
 * Selected distance in meters; `Unavailable` for non-weighted integration.
 *
 * # Safety
 * `reconstruction` must come from this library and the out pointers be valid.
 */
enum HfStatus hf_reconstruction_predicted(const struct HfReconstruction *reconstruction,
                                          size_t *index,
                                          double *distance);

/**
 * Number of candidates the run evaluated (and of entries in its weights).
 *
 * # Safety
 * `reconstruction` must come from this library and `count` be valid.
 */
enum HfStatus hf_reconstruction_candidate_count(const struct HfReconstruction *reconstruction,
                                                size_t *count);

/**
 * Candidate weights of the last epoch.
 *
 * # Safety
 * `reconstruction` must come from this library and `out` be valid for `len` writes.
 */
enum HfStatus hf_reconstruction_weights(const struct HfReconstruction *reconstruction,
                                        double *out,
                                        size_t len);

/**
 * `|O|` of the reconstructed object.
 *
 * # Safety
 * `reconstruction` must come from this library and `out` be valid for `len` writes.
 */
enum HfStatus hf_reconstruction_amplitude(const struct HfReconstruction *reconstruction,
                                          double *out,
                                          size_t len);

/**
 * Phase of the reconstructed object in radians.
 *
 * # Safety
 * `reconstruction` must come from this library and `out` be valid for `len` writes.
 */
enum HfStatus hf_reconstruction_phase(const struct HfReconstruction *reconstruction,
                                      double *out,
                                      size_t len);

/**
 * # Safety
 * `reconstruction` must be null or come from this library, and not be used afterwards.
 */
void hf_reconstruction_free(struct HfReconstruction *reconstruction);

/**
 * PSNR in dB of images in [0, 1]; `+inf` when identical.
 *
 * # Safety
 * Both images must be valid for `height * width` reads and `out` for one write.
 */
enum HfStatus hf_psnr(const double *reference,
                      const double *test,
                      size_t height,
                      size_t width,
                      double *out);

/**
 * Mean SSIM over 11x11 Gaussian windows; images must be at least 11x11.
 *
 * # Safety
 * Both images must be valid for `height * width` reads and `out` for one write.
 */
enum HfStatus hf_ssim(const double *reference,
                      const double *test,
                      size_t height,
                      size_t width,
                      double *out);

/**
 * Angular-spectrum propagation of a complex field by `distance` meters.
 * Input and output are split into real and imaginary planes; the output
 * may not alias the input.
 *
 * # Safety
 * All four buffers must be valid for `height * width` elements.
 */
enum HfStatus hf_propagate(const double *real,
                           const double *imag,
                           size_t height,
                           size_t width,
                           double wavelength,
                           double pixel_pitch,
                           double distance,
                           double *out_real,
                           double *out_imag);

/**
 * Reverse-attention weights for `n` candidate losses.
 *
 * # Safety
 * `losses` must be valid for `n` reads and `out` for `n` writes.
 */
enum HfStatus hf_attention_weights(const double *losses, size_t n, double *out);

/**
 * Gradient descent on a random scalar quadratic ensemble of `n` members.
 * Writes the final iterate and its distance to the ground minimizer.
 *
 * # Safety
 * `final_x` and `final_error` must be valid for one write each.
 */
enum HfStatus hf_quadratic_descend(size_t n,
                                   uint64_t seed,
                                   enum HfLossKind kind,
                                   double x0,
                                   size_t iterations,
                                   double *final_x,
                                   double *final_error);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOLOFOCUS_H */
