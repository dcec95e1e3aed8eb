#ifndef CYLSCALE_H
#define CYLSCALE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CsSolver {
  CS_SOLVER_LBFGSB = 0,
  CS_SOLVER_TRON = 1,
  CS_SOLVER_SPG = 2,
} CsSolver;

/**
 * Result code of every call.
 */
typedef enum CsStatus {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_POINTER = 1,
  CS_STATUS_INVALID_ARGUMENT = 2,
  CS_STATUS_DIMENSION = 3,
  CS_STATUS_CONFIG = 4,
  CS_STATUS_DEGENERATE_SCALING = 5,
  CS_STATUS_NUMERICAL = 6,
  CS_STATUS_IO = 7,
  CS_STATUS_INTERNAL = 8,
  CS_STATUS_PANIC = 9,
} CsStatus;

typedef enum CsProblemKind {
  CS_PROBLEM_KIND_QUADRATIC = 0,
  CS_PROBLEM_KIND_RECON = 1,
} CsProblemKind;

/**
 * How a solve ended.
 */
typedef enum CsSolveState {
  CS_SOLVE_STATE_CONVERGED = 0,
  CS_SOLVE_STATE_STALLED = 1,
  CS_SOLVE_STATE_MAX_ITER = 2,
  CS_SOLVE_STATE_TIME_LIMIT = 3,
  CS_SOLVE_STATE_NUMERICAL_FAILURE = 4,
} CsSolveState;

/**
 * A CT problem together with its lazily built scaling operator.
 */
typedef struct CsProblem CsProblem;

typedef struct CsResult CsResult;

/**
 * Solver choice and stopping rules. Non-positive numbers mean "use the default".
 */
typedef struct CsSolveOptions {
  enum CsSolver solver;
  bool scaled;
  size_t max_iter;
  double pg_rtol;
  double max_time;
} CsSolveOptions;

typedef struct CsSummary {
  enum CsSolveState state;
  size_t iterations;
  double final_f;
  double pg_ratio;
  size_t cg_total;
  double wall_time;
} CsSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *cs_last_error(void);

/**
 * Defaults: unscaled TRON with the problem's default tolerance.
 */
struct CsSolveOptions cs_solve_options_default(void);

/**
 * Build a synthetic problem on an `n_r × n_theta` polar grid with `n_det`
 * detectors per view. A negative `noise_seed` gives noiseless data.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum CsStatus cs_problem_new(enum CsProblemKind kind,
                             size_t n_r,
                             size_t n_theta,
                             size_t n_det,
                             int64_t noise_seed,
                             struct CsProblem **out);

/**
 * Build the problem described by the `[problem]` table of an experiment
 * config in TOML. The `[solver]` table is validated but otherwise ignored.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CsStatus cs_problem_from_toml(const char *toml, struct CsProblem **out);

/**
 * # Safety
 * `problem` must come from `cs_problem_new` or `cs_problem_from_toml`, or be null.
 */
void cs_problem_free(struct CsProblem *problem);

/**
 * Number of unknowns, or 0 for a null handle.
 *
 * # Safety
 * `problem` must be a live handle or null.
 */
size_t cs_problem_dim(const struct CsProblem *problem);

/**
 * Objective value at `x` (length `n`). The gradient is written to `grad`
 * when it is not null.
 *
 * # Safety
 * `x` must hold `n` values, `f` must be writable and `grad`, if not null, must
 * have room for `n` values.
 */
enum CsStatus cs_problem_eval(const struct CsProblem *problem,
                              const double *x,
                              size_t n,
                              double *f,
                              double *grad);

/**
 * Solve from the problem's default starting point.
 *
 * # Safety
 * `problem` must be a live handle, `options` null or valid, and `out` a valid
 * pointer. The problem handle must not be used from another thread meanwhile.
 */
enum CsStatus cs_solve(struct CsProblem *problem,
                       const struct CsSolveOptions *options,
                       struct CsResult **out);

/**
 * # Safety
 * `result` must be a live handle and `summary` writable.
 */
enum CsStatus cs_result_summary(const struct CsResult *result, struct CsSummary *summary);

/**
 * Copy the solution into `buf`, which must hold exactly `len` values.
 *
 * # Safety
 * `result` must be a live handle and `buf` must have room for `len` values.
 */
enum CsStatus cs_result_x(const struct CsResult *result, double *buf, size_t len);

/**
 * Write the iteration trace as CSV to `path`.
 *
 * # Safety
 * `result` must be a live handle and `path` a NUL-terminated string.
 */
enum CsStatus cs_result_write_trace(const struct CsResult *result, const char *path);

/**
 * # Safety
 * `result` must come from `cs_solve`, or be null.
 */
void cs_result_free(struct CsResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CYLSCALE_H */
