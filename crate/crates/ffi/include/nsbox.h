/* C interface to the nsbox toolkit. */

#ifndef NSBOX_H
#define NSBOX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum NsStatus {
  NS_STATUS_OK = 0,
  NS_STATUS_NULL_POINTER = 1,
  NS_STATUS_INVALID_ARGUMENT = 2,
  NS_STATUS_INVALID_BEHAVIOR = 3,
  NS_STATUS_UNSUPPORTED = 4,
  NS_STATUS_NO_BOUNDARY = 5,
  NS_STATUS_PARSE_ERROR = 6,
  NS_STATUS_IO_ERROR = 7,
  NS_STATUS_PANIC = 8,
} NsStatus;

/**
 * Opaque behavior handle.
 */
typedef struct NsBehavior NsBehavior;

/**
 * Result of a criterion evaluation.
 */
typedef struct NsReport {
  double lhs;
  double rhs;
  double margin;
  /**
   * 1 if violated, 0 otherwise.
   */
  int32_t violated;
} NsReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ns_last_error_message(void);

/**
 * Builds a named behavior: "pr", "box45", "white", "deterministic-zero"
 * or "isotropic" (which uses `bias`).
 *
 * # Safety
 * `name` must be a valid C string and `out` a valid pointer.
 */
enum NsStatus ns_behavior_named(const char *name,
                                size_t parties,
                                double bias,
                                struct NsBehavior **out);

/**
 * Convex combination of `count` behaviors.
 *
 * # Safety
 * `weights` and `parts` must point to `count` elements each.
 */
enum NsStatus ns_behavior_mix(const double *weights,
                              const struct NsBehavior *const *parts,
                              size_t count,
                              struct NsBehavior **out);

/**
 * Parses a behavior from `nsbox-v1` JSON and validates it.
 *
 * # Safety
 * `json` must be a valid C string and `out` a valid pointer.
 */
enum NsStatus ns_behavior_from_json(const char *json, struct NsBehavior **out);

/**
 * Serializes a behavior to `nsbox-v1` JSON. Free the result with
 * `ns_string_free`.
 *
 * # Safety
 * `b` must be a live handle and `out` a valid pointer.
 */
enum NsStatus ns_behavior_to_json(const struct NsBehavior *b, char **out);

/**
 * # Safety
 * `b` must be null or a handle from this library, not yet freed.
 */
void ns_behavior_free(struct NsBehavior *b);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void ns_string_free(char *s);

/**
 * Party count, or 0 for a null handle.
 *
 * # Safety
 * `b` must be null or a live handle.
 */
size_t ns_behavior_parties(const struct NsBehavior *b);

/**
 * `p(a|x)` with party `k` on bit `k` of both masks.
 *
 * # Safety
 * `b` must be a live handle and `out` a valid pointer.
 */
enum NsStatus ns_behavior_probability(const struct NsBehavior *b,
                                      uint32_t input,
                                      uint32_t outcome,
                                      double *out);

/**
 * Full correlator at input mask `input`.
 *
 * # Safety
 * `b` must be a live handle and `out` a valid pointer.
 */
enum NsStatus ns_behavior_correlator(const struct NsBehavior *b, uint32_t input, double *out);

/**
 * Writes 1 to `valid` if the behavior satisfies every constraint, else 0
 * (the last error message then describes the violations).
 *
 * # Safety
 * `b` must be a live handle and `valid` a valid pointer.
 */
enum NsStatus ns_behavior_validate(const struct NsBehavior *b, int32_t *valid);

/**
 * Evaluates a criterion by id, e.g. "ic-multi". `depth` is used by
 * "ic-success-bound" and `epsilon_channel` by "ic-noisy".
 *
 * # Safety
 * `b` must be a live handle, `criterion` a valid C string and `out` a
 * valid pointer.
 */
enum NsStatus ns_evaluate(const struct NsBehavior *b,
                          const char *criterion,
                          size_t depth,
                          double epsilon_channel,
                          struct NsReport *out);

/**
 * Biases `E_I` and `E_II` of the last party's two inputs.
 *
 * # Safety
 * `b` must be a live handle; the outputs must be valid pointers.
 */
enum NsStatus ns_biases(const struct NsBehavior *b, double *e_one, double *e_two);

/**
 * Exact success probability of the depth-`depth` concatenated protocol for
 * the receiver string `z` (`len` bytes, each 0 or 1).
 *
 * # Safety
 * `b` must be a live handle, `z` must point to `len` bytes and `out` must be
 * a valid pointer.
 */
enum NsStatus ns_concat_success_simulated(const struct NsBehavior *b,
                                          size_t depth,
                                          const uint8_t *z,
                                          size_t len,
                                          double *out);

/**
 * `½(1 + E_I^{K-r} E_II^r)`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum NsStatus ns_concat_success_closed(double e_one,
                                       double e_two,
                                       size_t depth,
                                       size_t ones,
                                       double *out);

/**
 * Critical `γ` of a criterion on the default slice at fixed
 * `epsilon_slice`. Returns `NS_STATUS_NO_BOUNDARY` if the ray has none.
 *
 * # Safety
 * `criterion` must be a valid C string; the outputs must be valid pointers.
 */
enum NsStatus ns_boundary_default_slice(const char *criterion,
                                        double epsilon_slice,
                                        double epsilon_channel,
                                        double *gamma_star,
                                        double *bracket_width);

/**
 * Binary entropy in bits.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum NsStatus ns_binary_entropy(double p, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NSBOX_H */
