#ifndef LRP_H
#define LRP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. The numeric values of `CONFIG`,
 * `DEPENDENCY` and `NUMERIC` match the exit codes of the `lrp` binary.
 */
typedef enum LrpStatus {
  LRP_STATUS_OK = 0,
  LRP_STATUS_IO = 1,
  LRP_STATUS_CONFIG = 2,
  LRP_STATUS_DEPENDENCY = 3,
  LRP_STATUS_NUMERIC = 4,
  LRP_STATUS_NULL_POINTER = 5,
  LRP_STATUS_INVALID_ARGUMENT = 6,
  LRP_STATUS_PANIC = 7,
} LrpStatus;

typedef enum LrpNorm {
  LRP_NORM_SCALED_SUP = 0,
  LRP_NORM_SCALED_EUCLIDEAN = 1,
} LrpNorm;

/**
 * Kernel, norm and `β` of one model.
 */
typedef struct LrpModel LrpModel;

/**
 * Neighbour sampler of a model at a fixed cut-off `r`.
 */
typedef struct LrpSampler LrpSampler;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *lrp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lrp_version(void);

/**
 * Creates a pure-power model `J(x) = ‖x‖^{-d-α}` in dimension `d`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum LrpStatus lrp_model_new(uint32_t d,
                             double alpha,
                             enum LrpNorm norm,
                             double beta,
                             uint64_t seed,
                             struct LrpModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`lrp_model_new`] not yet freed.
 */
void lrp_model_free(struct LrpModel *model);

/**
 * Probability `1 - e^{-β J_r(x, y)}` that `x` and `y` are joined at cut-off `r`.
 *
 * # Safety
 * `x` and `y` must point to `d` integers; `out` must be writable.
 */
enum LrpStatus lrp_edge_probability(const struct LrpModel *model,
                                    const int64_t *x,
                                    const int64_t *y,
                                    double r,
                                    double *out);

/**
 * Builds the neighbour sampler of `model` at cut-off `r`; explorations stop
 * after `max_size` vertices.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum LrpStatus lrp_sampler_new(const struct LrpModel *model,
                               double r,
                               uint64_t max_size,
                               struct LrpSampler **out);

/**
 * # Safety
 * `sampler` must be null or a handle from [`lrp_sampler_new`] not yet freed.
 */
void lrp_sampler_free(struct LrpSampler *sampler);

/**
 * Samples `n` origin clusters from streams `(seed, grid, 0..n)` and writes
 * their sizes; `truncated` may be null, otherwise it receives one flag per
 * sample. The output does not depend on `workers` (0 = all cores).
 *
 * # Safety
 * `sizes` must hold `n` values and `truncated`, when non-null, `n` bytes.
 */
enum LrpStatus lrp_sample_sizes(const struct LrpSampler *sampler,
                                uint64_t seed,
                                uint32_t grid,
                                uint64_t n,
                                uint32_t workers,
                                uint64_t *sizes,
                                uint8_t *truncated);

/**
 * Batch-means estimate of `E|K|` from `n` samples, truncated ones excluded.
 *
 * # Safety
 * `sampler` must be a live handle; `mean` and `stderr` writable.
 */
enum LrpStatus lrp_mean_size(const struct LrpSampler *sampler,
                             uint64_t seed,
                             uint32_t grid,
                             uint64_t n,
                             uint32_t workers,
                             double *mean,
                             double *stderr);

/**
 * `(2p - 3)!! A^{p-1} (α/β) r^{(2p-1)α}`.
 */
double lrp_moment_family(double alpha, double beta, double a, uint32_t p, double r);

/**
 * Closed-form solution of `f' = a (1 - h) r^{-α-1} f²` with `h(r) = c r^b`
 * that grows like `(α/a) r^α`; the tail integral of `h` is taken by
 * quadrature up to `horizon` and analytically beyond it.
 *
 * # Safety
 * `out` must be writable.
 */
enum LrpStatus lrp_riccati_exact(double a,
                                 double alpha,
                                 double c,
                                 double b,
                                 double r,
                                 double horizon,
                                 double *out);

/**
 * Number of degree-3 trees with `n + 1` labelled leaves, `(2n - 3)!!`.
 *
 * # Safety
 * `out` must be writable.
 */
enum LrpStatus lrp_tree_count(uint32_t n, uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LRP_H */
