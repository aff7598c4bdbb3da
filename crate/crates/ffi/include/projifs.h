#ifndef PROJIFS_H
#define PROJIFS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ProjifsStatus {
  PROJIFS_STATUS_OK = 0,
  PROJIFS_STATUS_INVALID_ARGUMENT = 1,
  PROJIFS_STATUS_NULL_POINTER = 2,
  PROJIFS_STATUS_PARSE = 3,
  PROJIFS_STATUS_BUDGET_EXCEEDED = 4,
  /**
   * The computation ran but could not reach a verdict.
   */
  PROJIFS_STATUS_INCONCLUSIVE = 5,
  PROJIFS_STATUS_INTERNAL = 6,
} ProjifsStatus;

/**
 * Angles in (0, π] approximating an attractor.
 */
typedef struct ProjifsCloud ProjifsCloud;

/**
 * A finite alphabet of SL(2,R) matrices.
 */
typedef struct ProjifsSystem ProjifsSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *projifs_version(void);

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into the library on this thread.
 */
const char *projifs_last_error_message(void);

/**
 * Builds a system from `count` matrices stored row-major as
 * `a, b, c, d` in `entries` (`4 * count` doubles). Determinants are
 * renormalized to 1; non-positive determinants are rejected.
 *
 * # Safety
 * `entries` must point to `4 * count` readable doubles and `out` to a
 * writable handle pointer.
 */
enum ProjifsStatus projifs_system_from_matrices(const double *entries,
                                                size_t count,
                                                struct ProjifsSystem **out);

/**
 * Parses a system from configuration text (`matrix a b c d` lines and
 * optional settings).
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a writable handle pointer.
 */
enum ProjifsStatus projifs_system_from_config(const char *text, struct ProjifsSystem **out);

/**
 * Releases a system. NULL is ignored.
 *
 * # Safety
 * `sys` must come from this library and not have been freed.
 */
void projifs_system_free(struct ProjifsSystem *sys);

/**
 * Number of letters in the alphabet.
 *
 * # Safety
 * `sys` must be a live handle and `out` writable.
 */
enum ProjifsStatus projifs_system_len(const struct ProjifsSystem *sys, size_t *out);

/**
 * Bracket `[lo, hi]` for the critical exponent from word sums up to
 * `depth`. `certified` is set when an almost-multiplicativity constant was
 * found and `hi` is a proven bound; `hi` may be +inf otherwise.
 *
 * # Safety
 * `sys` must be a live handle and the output pointers writable.
 */
enum ProjifsStatus projifs_critical_exponent(const struct ProjifsSystem *sys,
                                             size_t depth,
                                             double *lo,
                                             double *hi,
                                             bool *certified);

/**
 * Certifies uniform hyperbolicity with a compactly invariant multicone.
 * Returns `INCONCLUSIVE` when no certificate is found, which does not
 * prove the system is not uniformly hyperbolic.
 *
 * # Safety
 * `sys` must be a live handle and the output pointers writable.
 */
enum ProjifsStatus projifs_certify_uh(const struct ProjifsSystem *sys,
                                      double *margin,
                                      double *lambda);

/**
 * Attracting fixed points of all words up to `depth`.
 *
 * # Safety
 * `sys` must be a live handle and `out` a writable handle pointer.
 */
enum ProjifsStatus projifs_attractor_cloud(const struct ProjifsSystem *sys,
                                           size_t depth,
                                           struct ProjifsCloud **out);

/**
 * Releases a cloud. NULL is ignored.
 *
 * # Safety
 * `cloud` must come from this library and not have been freed.
 */
void projifs_cloud_free(struct ProjifsCloud *cloud);

/**
 * Copies up to `cap` sorted angles into `buf` and stores the total number
 * of points in `len`. Pass `buf = NULL` and `cap = 0` to query the size.
 *
 * # Safety
 * `cloud` must be a live handle, `buf` must have room for `cap` doubles
 * and `len` must be writable.
 */
enum ProjifsStatus projifs_cloud_thetas(const struct ProjifsCloud *cloud,
                                        double *buf,
                                        size_t cap,
                                        size_t *len);

/**
 * Box-counting dimension of a cloud over the default scales.
 * `INCONCLUSIVE` when too few scales are usable.
 *
 * # Safety
 * `cloud` must be a live handle and the output pointers writable.
 */
enum ProjifsStatus projifs_box_dimension(const struct ProjifsCloud *cloud,
                                         double *value,
                                         double *stderr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROJIFS_H */
