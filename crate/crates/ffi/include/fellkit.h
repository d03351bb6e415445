#ifndef FELLKIT_H
#define FELLKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum FellkitStatus {
  FELLKIT_STATUS_OK = 0,
  FELLKIT_STATUS_NULL_POINTER = 1,
  FELLKIT_STATUS_INVALID_ARGUMENT = 2,
  FELLKIT_STATUS_PARSE_ERROR = 3,
  /**
   * The input does not have the required structure (not unitary, not a
   * twist, not orientable, ...).
   */
  FELLKIT_STATUS_STRUCTURE_ERROR = 4,
  FELLKIT_STATUS_CONTRACT_VIOLATION = 5,
  FELLKIT_STATUS_PANIC = 6,
} FellkitStatus;

typedef enum FellkitPairClass {
  FELLKIT_PAIR_CLASS_DIAGONAL = 0,
  FELLKIT_PAIR_CLASS_CARTAN = 1,
  FELLKIT_PAIR_CLASS_NEITHER = 2,
} FellkitPairClass;

/**
 * A Fell bundle model, optionally with a covariance generator.
 */
typedef struct FellkitModel FellkitModel;

/**
 * An embedding invariant Φ.
 */
typedef struct FellkitPhi FellkitPhi;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The library version as a static string. Do not free.
 */
const char *fellkit_version(void);

/**
 * The last error message set on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread. Do not free.
 */
const char *fellkit_last_error_message(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void fellkit_string_free(char *s);

/**
 * The imprimitivity bundle with fibre dimensions `dims[0..len]`.
 *
 * # Safety
 * `dims` must point to `len` readable values; `out` must be writable.
 */
enum FellkitStatus fellkit_model_imprimitivity(const size_t *dims,
                                               size_t len,
                                               struct FellkitModel **out);

/**
 * A named preset. `n` and `dim` equal to 0 select the preset's defaults.
 *
 * # Safety
 * `name` must be a nul-terminated string; `out` must be writable.
 */
enum FellkitStatus fellkit_model_preset(const char *name,
                                        size_t n,
                                        size_t dim,
                                        uint64_t seed,
                                        struct FellkitModel **out);

/**
 * Parses a model file.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum FellkitStatus fellkit_model_from_json(const char *json, double eps, struct FellkitModel **out);

/**
 * Serializes a model. Free the result with `fellkit_string_free`.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum FellkitStatus fellkit_model_to_json(const struct FellkitModel *model, char **out);

/**
 * # Safety
 * `model` must be NULL or a live handle not used afterwards.
 */
void fellkit_model_free(struct FellkitModel *model);

/**
 * Number of points and total matrix size `Σ n_x`.
 *
 * # Safety
 * `model` must be a live handle; out pointers must be writable.
 */
enum FellkitStatus fellkit_model_shape(const struct FellkitModel *model,
                                       size_t *out_points,
                                       size_t *out_ambient_dim);

/**
 * Samples the Fell bundle axioms.
 *
 * # Safety
 * `model` must be a live handle; out pointers must be writable.
 */
enum FellkitStatus fellkit_check_axioms(const struct FellkitModel *model,
                                        size_t samples,
                                        uint64_t seed,
                                        double eps,
                                        bool *out_passed,
                                        double *out_max_residual);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum FellkitStatus fellkit_is_saturated(const struct FellkitModel *model, double eps, bool *out);

/**
 * Dimension of the kernel of the restriction expectation.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum FellkitStatus fellkit_kernel_dimension(const struct FellkitModel *model, size_t *out);

/**
 * Runs every applicable check and writes the combined JSON report.
 *
 * # Safety
 * `model` must be a live handle; out pointers must be writable. Free
 * `*out_json` with `fellkit_string_free`.
 */
enum FellkitStatus fellkit_report_json(const struct FellkitModel *model,
                                       size_t samples,
                                       uint64_t seed,
                                       double eps,
                                       char **out_json,
                                       bool *out_passed);

/**
 * Φ built from the model's covariance generator.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum FellkitStatus fellkit_phi_from_model(const struct FellkitModel *model,
                                          struct FellkitPhi **out);

/**
 * # Safety
 * `phi` must be NULL or a live handle not used afterwards.
 */
void fellkit_phi_free(struct FellkitPhi *phi);

/**
 * Side length of the square matrix Φ.
 *
 * # Safety
 * `phi` must be a live handle; `out` must be writable.
 */
enum FellkitStatus fellkit_phi_dim(const struct FellkitPhi *phi, size_t *out);

/**
 * Copies Φ row-major as interleaved `(re, im)` pairs. `len` is the number
 * of doubles available at `out` and must be at least `2·dim²`.
 *
 * # Safety
 * `phi` must be a live handle; `out` must point to `len` writable doubles.
 */
enum FellkitStatus fellkit_phi_copy_matrix(const struct FellkitPhi *phi, double *out, size_t len);

/**
 * # Safety
 * `phi` must be a live handle; `out` must be writable.
 */
enum FellkitStatus fellkit_phi_is_orientable(const struct FellkitPhi *phi, double eps, bool *out);

/**
 * Reads the pair off an orientable Φ and classifies it.
 *
 * # Safety
 * `phi` must be a live handle; `out` must be writable.
 */
enum FellkitStatus fellkit_phi_readoff_class(const struct FellkitPhi *phi,
                                             double eps,
                                             enum FellkitPairClass *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FELLKIT_H */
