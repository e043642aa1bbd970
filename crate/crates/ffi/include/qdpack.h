#ifndef QDPACK_H
#define QDPACK_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * `qd_decide_overlap` verdicts.
 */
#define QD_DISJOINT_CERTIFIED 0

#define QD_OVERLAP_DETECTED 1

#define QD_INCONCLUSIVE 2

/**
 * `qd_chain_verdict` kinds.
 */
#define QD_CHAIN_CERTIFIED 0

#define QD_CHAIN_A_SQUARED_NOT_PSD 1

#define QD_CHAIN_A_SINGULAR 2

#define QD_CHAIN_NORM_BLOWUP 3

/**
 * Status codes. Zero means success.
 */
typedef enum QdStatus {
  QD_STATUS_OK = 0,
  QD_STATUS_NULL_POINTER = 1,
  QD_STATUS_INVALID_INPUT = 2,
  QD_STATUS_GUARD_VIOLATION = 3,
  QD_STATUS_NOT_PSD = 4,
  QD_STATUS_DEGENERATE_SEED = 5,
  QD_STATUS_OUT_OF_RANGE = 6,
  QD_STATUS_NUMERICAL = 7,
  QD_STATUS_PANIC = 8,
} QdStatus;

/**
 * Opaque handle to a finished chain run.
 */
typedef struct QdChain QdChain;

/**
 * Opaque domain handle.
 */
typedef struct QdDomain QdDomain;

typedef struct QdComplex {
  double re;
  double im;
} QdComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a disk union from `n` packed `(cx, cy, r)` triples.
 *
 * # Safety
 * `triples` must point to `3 * n` doubles; `out` must be writable.
 */
enum QdStatus qd_domain_from_disks(const double *triples, size_t n, struct QdDomain **out);

/**
 * Builds a domain from a JSON document, either `{"disks":[...]}` or `{"P":...,"Q":...}`.
 *
 * # Safety
 * `json` must be a NUL-terminated UTF-8 string; `out` must be writable.
 */
enum QdStatus qd_domain_from_json(const char *json, struct QdDomain **out);

/**
 * # Safety
 * `dom` must come from a `qd_domain_from_*` call and not be used afterwards.
 */
void qd_domain_free(struct QdDomain *dom);

/**
 * Number of disks, or the quadrature degree for raw input.
 *
 * # Safety
 * `dom` must be a live handle or null.
 */
size_t qd_domain_degree(const struct QdDomain *dom);

/**
 * Exponential transform `E(w, z)`.
 *
 * # Safety
 * `dom` must be a live handle; `out` must be writable.
 */
enum QdStatus qd_exp_transform(const struct QdDomain *dom,
                               struct QdComplex w,
                               struct QdComplex z,
                               struct QdComplex *out);

/**
 * Four-point kernel `L(w, z, u, v)`.
 *
 * # Safety
 * `dom` must be a live handle; `out` must be writable.
 */
enum QdStatus qd_kernel_l(const struct QdDomain *dom,
                          struct QdComplex w,
                          struct QdComplex z,
                          struct QdComplex u,
                          struct QdComplex v,
                          struct QdComplex *out);

/**
 * Runs the overlap decision procedure.
 *
 * `samples` points are drawn in the default band with the given seed and
 * `tol <= 0` selects the default tolerance. On success `verdict` receives one
 * of the `QD_DISJOINT_CERTIFIED`, `QD_OVERLAP_DETECTED`, `QD_INCONCLUSIVE`
 * constants. If `report_json` is non-null it receives a JSON report to be
 * released with [`qd_string_free`].
 *
 * # Safety
 * `dom` must be a live handle; `verdict` must be writable; `report_json` may be null.
 */
enum QdStatus qd_decide_overlap(const struct QdDomain *dom,
                                size_t samples,
                                uint64_t seed,
                                double tol,
                                size_t max_iter,
                                int32_t *verdict,
                                char **report_json);

/**
 * Runs `k` steps of the subnormal chain. `tol <= 0` selects the default.
 *
 * A failing chain still yields a handle; inspect it with [`qd_chain_verdict`].
 *
 * # Safety
 * `dom` must be a live handle; `out` must be writable.
 */
enum QdStatus qd_chain_run(const struct QdDomain *dom, size_t k, double tol, struct QdChain **out);

/**
 * # Safety
 * `ch` must come from [`qd_chain_run`] and not be used afterwards.
 */
void qd_chain_free(struct QdChain *ch);

/**
 * Writes the verdict kind (`QD_CHAIN_*`) and the step count: the certified
 * depth on success, the failing step otherwise.
 *
 * # Safety
 * `ch` must be a live handle; `kind` and `step` must be writable.
 */
enum QdStatus qd_chain_verdict(const struct QdChain *ch, int32_t *kind, size_t *step);

/**
 * Number of recorded trace rows.
 *
 * # Safety
 * `ch` must be a live handle or null.
 */
size_t qd_chain_trace_len(const struct QdChain *ch);

/**
 * Reads trace row `index`: smallest eigenvalue and trace of `A_k²`, and `‖D_k‖`.
 *
 * # Safety
 * `ch` must be a live handle; the three out pointers must be writable.
 */
enum QdStatus qd_chain_trace(const struct QdChain *ch,
                             size_t index,
                             double *min_eig,
                             double *trace,
                             double *norm_d);

/**
 * Smallest half-separation `a` for which two unit disks at `±a` survive `k` steps.
 *
 * # Safety
 * `out` must be writable.
 */
enum QdStatus qd_two_disk_threshold(size_t k, double *out);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void qd_string_free(char *s);

/**
 * Message for the last failing call on this thread, or null.
 *
 * The pointer stays valid until the next call into the library from the same thread.
 */
const char *qd_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qd_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QDPACK_H */
