#ifndef ROBIN_UCP_H
#define ROBIN_UCP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum RucpStatus {
  RUCP_STATUS_OK = 0,
  RUCP_STATUS_NULL_POINTER = 1,
  RUCP_STATUS_INVALID_ARGUMENT = 2,
  RUCP_STATUS_UNKNOWN_NAME = 3,
  RUCP_STATUS_CONFIG = 4,
  RUCP_STATUS_NUMERICAL = 5,
  RUCP_STATUS_NOT_A_SOLUTION = 6,
  /**
   * The run finished but some inequality failed.
   */
  RUCP_STATUS_VIOLATIONS = 7,
  RUCP_STATUS_IO = 8,
  RUCP_STATUS_PANIC = 9,
} RucpStatus;

/**
 * A frequency profile over a radius grid.
 */
typedef struct RucpProfile RucpProfile;

/**
 * A solution together with its coefficient set.
 */
typedef struct RucpSolution RucpSolution;

/**
 * One row of a profile.
 */
typedef struct RucpProfileRow {
  double r;
  double h;
  double i;
  double n;
  double dn;
  double ntilde;
  bool valid;
} RucpProfileRow;

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *rucp_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rucp_version(void);

/**
 * Create an analytic catalogue solution.
 *
 * # Safety
 * `name` must be a NUL-terminated string, `params` must point to
 * `n_params` doubles (or be null when `n_params` is 0) and `out` must be a
 * valid pointer.
 */
enum RucpStatus rucp_solution_analytic(const char *name,
                                       const double *params,
                                       size_t n_params,
                                       struct RucpSolution **out);

/**
 * P1 solution on the half-disk mesh of the given refinement level, with the
 * coefficients of the named analytic entry and its values as arc data.
 *
 * # Safety
 * As for [`rucp_solution_analytic`].
 */
enum RucpStatus rucp_solution_fem(const char *name,
                                  const double *params,
                                  size_t n_params,
                                  size_t level,
                                  struct RucpSolution **out);

/**
 * # Safety
 * `sol` must come from a `rucp_solution_*` constructor and not be used
 * afterwards. Null is ignored.
 */
void rucp_solution_free(struct RucpSolution *sol);

/**
 * Value and gradient at `x` (two doubles). `grad` may be null.
 *
 * # Safety
 * `sol` must be a live handle; `x` must point to two doubles, `value` to
 * one and `grad`, if non-null, to two.
 */
enum RucpStatus rucp_solution_eval(const struct RucpSolution *sol,
                                   const double *x,
                                   double *value,
                                   double *grad);

/**
 * Measured weak-form residual, or NaN when none was measured.
 *
 * # Safety
 * `sol` must be a live handle or null.
 */
double rucp_solution_residual(const struct RucpSolution *sol);

/**
 * Frequency profile of `sol` with weight exponent `alpha` on `radii`.
 *
 * # Safety
 * `sol` must be a live handle, `radii` must point to `n` doubles and `out`
 * must be a valid pointer.
 */
enum RucpStatus rucp_profile_build(const struct RucpSolution *sol,
                                   double alpha,
                                   const double *radii,
                                   size_t n,
                                   struct RucpProfile **out);

/**
 * # Safety
 * `profile` must come from [`rucp_profile_build`] and not be used
 * afterwards. Null is ignored.
 */
void rucp_profile_free(struct RucpProfile *profile);

/**
 * Number of rows; 0 for null.
 *
 * # Safety
 * `profile` must be a live handle or null.
 */
size_t rucp_profile_len(const struct RucpProfile *profile);

/**
 * `N` at radius `min(1, r_max)`; NaN for null.
 *
 * # Safety
 * `profile` must be a live handle or null.
 */
double rucp_profile_n_at_one(const struct RucpProfile *profile);

/**
 * Copy row `index` into `out`.
 *
 * # Safety
 * `profile` must be a live handle and `out` a valid pointer.
 */
enum RucpStatus rucp_profile_row(const struct RucpProfile *profile,
                                 size_t index,
                                 struct RucpProfileRow *out);

/**
 * Run a TOML experiment and write its reports to `output_dir` (or the
 * directory named in the config when null).
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string; `output_dir` must be one
 * or null.
 */
enum RucpStatus rucp_run_config(const char *config_toml, const char *output_dir);

#endif  /* ROBIN_UCP_H */
