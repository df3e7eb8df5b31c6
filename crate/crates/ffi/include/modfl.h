#ifndef MODFL_H
#define MODFL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum ModflStatus {
  MODFL_STATUS_OK = 0,
  MODFL_STATUS_NULL_POINTER = 1,
  MODFL_STATUS_INVALID_ARGUMENT = 2,
  MODFL_STATUS_DIMENSION = 3,
  MODFL_STATUS_DOMAIN = 4,
  MODFL_STATUS_CONFIG = 5,
  MODFL_STATUS_PARSE = 6,
  MODFL_STATUS_IO = 7,
  MODFL_STATUS_INFEASIBLE = 8,
  MODFL_STATUS_UNBOUNDED = 9,
  MODFL_STATUS_NO_CONVERGENCE = 10,
  MODFL_STATUS_SINGULAR_KKT = 11,
  MODFL_STATUS_NON_FINITE = 12,
  MODFL_STATUS_UNSUPPORTED = 13,
  MODFL_STATUS_ABORTED = 14,
  MODFL_STATUS_EMPTY_FRONT = 15,
  MODFL_STATUS_PANIC = 16,
} ModflStatus;

/**
 * Which instances an evaluation covers.
 */
typedef enum ModflSplit {
  MODFL_SPLIT_TRAIN = 0,
  MODFL_SPLIT_VALIDATION = 1,
  MODFL_SPLIT_TEST = 2,
  MODFL_SPLIT_ALL = 3,
} ModflSplit;

/**
 * Opaque dataset handle.
 */
typedef struct ModflDataset ModflDataset;

/**
 * Opaque trained-model handle.
 */
typedef struct ModflModel ModflModel;

/**
 * Aggregate metrics of one evaluation. `har` is NaN when no instance has a
 * positive true hypervolume.
 */
typedef struct ModflMetrics {
  double gd;
  double mpfe;
  double har;
  double regret;
  size_t instances;
  size_t har_skipped;
  size_t regret_skipped;
} ModflMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *modfl_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *modfl_version(void);

/**
 * Reads a dataset directory.
 *
 * # Safety
 * `dir` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ModflStatus modfl_dataset_read(const char *dir, struct ModflDataset **out);

/**
 * Generates a bipartite matching dataset with `nodes` nodes per instance.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ModflStatus modfl_dataset_generate_bipartite(size_t nodes,
                                                  size_t instances,
                                                  double rho,
                                                  uint64_t seed,
                                                  struct ModflDataset **out);

/**
 * Writes instance files and the manifest into `dir`.
 *
 * # Safety
 * `ds` must be a live handle and `dir` a NUL-terminated string.
 */
enum ModflStatus modfl_dataset_write(const struct ModflDataset *ds, const char *dir);

/**
 * Number of instances, or 0 for NULL.
 *
 * # Safety
 * `ds` must be NULL or a live handle.
 */
size_t modfl_dataset_len(const struct ModflDataset *ds);

/**
 * Variables, objectives and feature width of instance `index`.
 *
 * # Safety
 * `ds` must be a live handle; output pointers may be NULL.
 */
enum ModflStatus modfl_instance_shape(const struct ModflDataset *ds,
                                      size_t index,
                                      size_t *n_vars,
                                      size_t *t_objectives,
                                      size_t *n_features);

/**
 * Releases a dataset handle.
 *
 * # Safety
 * `ds` must be NULL or a handle not yet freed.
 */
void modfl_dataset_free(struct ModflDataset *ds);

/**
 * Loads a checkpoint written by `modfl train`.
 *
 * # Safety
 * `file` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ModflStatus modfl_model_load(const char *file, struct ModflModel **out);

/**
 * Releases a model handle.
 *
 * # Safety
 * `model` must be NULL or a handle not yet freed.
 */
void modfl_model_free(struct ModflModel *model);

/**
 * Scores `model` on a split of `ds`. A NULL model predicts the true costs.
 *
 * # Safety
 * `ds` must be a live handle, `model` NULL or a live handle, `out` valid.
 */
enum ModflStatus modfl_evaluate(const struct ModflDataset *ds,
                                const struct ModflModel *model,
                                enum ModflSplit split,
                                size_t denom,
                                struct ModflMetrics *out);

/**
 * Minimizes `c·x` subject to `A x ≤ b`, `lower ≤ x ≤ upper`. `a` is
 * `m × n`; infinite bounds are allowed. Writes a vertex optimum to `x_out`
 * (length `n`) and its value to `objective_out` (may be NULL).
 *
 * # Safety
 * Array arguments must have the stated lengths.
 */
enum ModflStatus modfl_solve_lp(size_t n,
                                size_t m,
                                const double *a,
                                const double *b,
                                const double *lower,
                                const double *upper,
                                const double *c,
                                double *x_out,
                                double *objective_out);

/**
 * Smoothed LP layer: `x = argmin c·x + γ‖x‖²` over the polytope, and, when
 * `upstream` is non-NULL, the vector-Jacobian product `(∂x/∂c)ᵀ upstream`
 * in `grad_c_out`. `gamma = 0` solves the plain LP.
 *
 * # Safety
 * Array arguments must have the stated lengths.
 */
enum ModflStatus modfl_dslp(size_t n,
                            size_t m,
                            const double *a,
                            const double *b,
                            const double *lower,
                            const double *upper,
                            const double *c,
                            double gamma,
                            const double *upstream,
                            double *x_out,
                            double *grad_c_out);

/**
 * sRMMD between two `k × d` point sets. `epsilon ≤ 0` keeps the default
 * entropic regularization. Gradient outputs may be NULL.
 *
 * # Safety
 * Array arguments must have length `k · d`.
 */
enum ModflStatus modfl_srmmd(size_t k,
                             size_t d,
                             const double *x,
                             const double *y,
                             double epsilon,
                             uint64_t seed,
                             double *value_out,
                             double *grad_x_out,
                             double *grad_y_out);

/**
 * Generational distance of `pred` (`k_pred × t`) to `truth` (`k_true × t`).
 *
 * # Safety
 * Array arguments must have the stated lengths.
 */
enum ModflStatus modfl_gd(const double *pred,
                          size_t k_pred,
                          const double *truth,
                          size_t k_true,
                          size_t t,
                          double *out);

/**
 * Maximum Pareto-front error with exponent `p`.
 *
 * # Safety
 * Array arguments must have the stated lengths.
 */
enum ModflStatus modfl_mpfe(const double *pred,
                            size_t k_pred,
                            const double *truth,
                            size_t k_true,
                            size_t t,
                            double p,
                            double *out);

/**
 * Hypervolume of a minimization front (`k × t`, `t ≤ 3`) against
 * `reference`.
 *
 * # Safety
 * Array arguments must have the stated lengths.
 */
enum ModflStatus modfl_hypervolume(const double *points,
                                   size_t k,
                                   size_t t,
                                   const double *reference,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MODFL_H */
