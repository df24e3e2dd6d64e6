#ifndef PRODENSE_H
#define PRODENSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ProdenseStatus {
  PRODENSE_STATUS_OK = 0,
  PRODENSE_STATUS_NULL_ARGUMENT = 1,
  PRODENSE_STATUS_INVALID_UTF8 = 2,
  PRODENSE_STATUS_PARSE = 3,
  PRODENSE_STATUS_INVALID = 4,
  /**
   * A hypothesis or precondition of the operation does not hold.
   */
  PRODENSE_STATUS_PRECONDITION = 5,
  /**
   * A certificate failed verification.
   */
  PRODENSE_STATUS_REJECTED = 6,
  PRODENSE_STATUS_PANIC = 7,
} ProdenseStatus;

typedef enum ProdenseVerdict {
  PRODENSE_VERDICT_YES = 0,
  PRODENSE_VERDICT_NO = 1,
  PRODENSE_VERDICT_UNKNOWN = 2,
} ProdenseVerdict;

/**
 * A certificate produced by a command or read from JSON.
 */
typedef struct ProdenseCertificate ProdenseCertificate;

/**
 * An element of `PGL_n(ℚ)` at a fixed place.
 */
typedef struct ProdenseMatrix ProdenseMatrix;

/**
 * A parsed problem file.
 */
typedef struct ProdenseProblem ProdenseProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, statically allocated.
 */
const char *prodense_version(void);

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next call into the library on the same thread.
 */
const char *prodense_last_error(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void prodense_string_free(char *s);

/**
 * Parses a problem file.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum ProdenseStatus prodense_problem_parse(const char *text, struct ProdenseProblem **out);

/**
 * # Safety
 * `p` must be NULL or a handle from `prodense_problem_parse`.
 */
void prodense_problem_free(struct ProdenseProblem *p);

/**
 * Runs `command` (`analyze`, `pingpong`, `synthesize` or `tree`) on a
 * problem and returns its certificate.
 *
 * # Safety
 * `command` must be a NUL-terminated string, `problem` a live handle and
 * `out` writable.
 */
enum ProdenseStatus prodense_run(const char *command,
                                 const struct ProdenseProblem *problem,
                                 struct ProdenseCertificate **out);

/**
 * Reads a certificate from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum ProdenseStatus prodense_certificate_from_json(const char *json,
                                                   struct ProdenseCertificate **out);

/**
 * Canonical JSON text of a certificate.
 *
 * # Safety
 * `cert` must be a live handle; `out` must be writable.
 */
enum ProdenseStatus prodense_certificate_to_json(const struct ProdenseCertificate *cert,
                                                 char **out);

/**
 * The command-line exit code for the certificate's verdict (0, 3 or 4).
 *
 * # Safety
 * `cert` must be a live handle; `out` must be writable.
 */
enum ProdenseStatus prodense_certificate_exit_code(const struct ProdenseCertificate *cert,
                                                   int32_t *out);

/**
 * Re-checks a certificate. Returns `Rejected` with the reason in
 * `prodense_last_error` when it does not hold.
 *
 * # Safety
 * `cert` must be a live handle.
 */
enum ProdenseStatus prodense_certificate_verify(const struct ProdenseCertificate *cert);

/**
 * # Safety
 * `c` must be NULL or a certificate handle.
 */
void prodense_certificate_free(struct ProdenseCertificate *c);

/**
 * Builds an `n×n` matrix from row-major integer entries. `prime` selects
 * the place: 0 for the archimedean one, otherwise the p-adic one.
 *
 * # Safety
 * `entries` must point to `n*n` values; `out` must be writable.
 */
enum ProdenseStatus prodense_matrix_from_i64(size_t n,
                                             const int64_t *entries,
                                             uint64_t prime,
                                             struct ProdenseMatrix **out);

/**
 * # Safety
 * `m` must be NULL or a matrix handle.
 */
void prodense_matrix_free(struct ProdenseMatrix *m);

/**
 * Rational bounds `lo ≤ (σ₂/σ₁)² ≤ hi`, as `p/q` strings.
 *
 * # Safety
 * `m` must be a live handle; `lo` and `hi` must be writable.
 */
enum ProdenseStatus prodense_matrix_contraction_gap_sq(const struct ProdenseMatrix *m,
                                                       char **lo,
                                                       char **hi);

/**
 * Certifies `(r, ε)`-proximality. On `Yes`, `cert_json` (if not NULL)
 * receives the certificate as JSON.
 *
 * # Safety
 * `m` must be a live handle, `r_sq` and `epsilon_sq` NUL-terminated
 * rationals, `verdict` writable, `cert_json` NULL or writable.
 */
enum ProdenseStatus prodense_matrix_certify_proximal(const struct ProdenseMatrix *m,
                                                     const char *r_sq,
                                                     const char *epsilon_sq,
                                                     enum ProdenseVerdict *verdict,
                                                     char **cert_json);

/**
 * Exhaustive search for a relation among `count` matrices with reduced
 * words up to `max_len`. `free` receives 1 when none is found.
 *
 * # Safety
 * `mats` must point to `count` live handles; `free` must be writable.
 */
enum ProdenseStatus prodense_matrix_oracle(const struct ProdenseMatrix *const *mats,
                                           size_t count,
                                           size_t max_len,
                                           int32_t *free);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRODENSE_H */
