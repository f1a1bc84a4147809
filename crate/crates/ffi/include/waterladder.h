#ifndef WATERLADDER_H
#define WATERLADDER_H

/* Generated by cbindgen from waterladder-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes; nonzero values match the CLI exit codes where they overlap.
typedef enum wl_status {
  WL_OK = 0,
  WL_INFEASIBLE = 2,
  WL_INVALID_INPUT = 3,
  WL_INTERNAL_ERROR = 4,
  WL_NULL_POINTER = 5,
  WL_BUFFER_TOO_SMALL = 6,
} wl_status;

// Opaque problem handle.
typedef struct wl_problem wl_problem;

// Opaque solution handle.
typedef struct wl_solution wl_solution;

// Solver options; obtain defaults from [`wl_solver_options_default`].
typedef struct wl_solver_options {
  // Nonzero enables the equation-skipping rule (default on).
  int32_t skip_rule;
  // Nonzero settles the last constrained variable directly (default off).
  int32_t final_shortcut;
  // Relative residual tolerance of the inner root solve.
  double eps_root;
  // Relative tolerance for tied candidate multipliers.
  double eps_tie;
} wl_solver_options;

// Verification residuals and verdict; see the solver documentation for the
// residual definitions.
typedef struct wl_kkt_report {
  double stationarity_residual;
  double monotone_violation;
  double primal_violation;
  double comp_slack_constraints;
  double comp_slack_boxes;
  // Nonzero when every residual is inside tolerance.
  int32_t pass;
} wl_kkt_report;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Default solver options.
struct wl_solver_options wl_solver_options_default(void);

// Parses a problem from `waterladder/1` JSON.
//
// # Safety
// `json` must point to a NUL-terminated string and `out` to writable
// storage for one pointer. On success `*out` owns the problem and must be
// released with [`wl_problem_free`].
enum wl_status wl_problem_from_json(const char *json, struct wl_problem **out);

// Releases a problem handle; a null pointer is ignored.
//
// # Safety
// `p` must come from [`wl_problem_from_json`] and not have been freed.
void wl_problem_free(struct wl_problem *p);

// Number of variables of the problem.
//
// # Safety
// `p` must be a live handle.
size_t wl_problem_len(const struct wl_problem *p);

// Solves the problem. `opts` may be null for defaults.
//
// # Safety
// `p` must be a live problem handle, `out` writable storage for one
// pointer. On success `*out` owns the solution.
enum wl_status wl_solve(const struct wl_problem *p,
                        const struct wl_solver_options *opts,
                        struct wl_solution **out);

// Releases a solution handle; a null pointer is ignored.
//
// # Safety
// `s` must come from [`wl_solve`] and not have been freed.
void wl_solution_free(struct wl_solution *s);

// Number of variables of the solution.
//
// # Safety
// `s` must be a live handle.
size_t wl_solution_len(const struct wl_solution *s);

// Copies the optimal point into `buf` (`len` entries available).
//
// # Safety
// `s` must be a live handle and `buf` writable for `len` doubles.
enum wl_status wl_solution_x(const struct wl_solution *s, double *buf, size_t len);

// Copies the prefix multipliers into `buf`.
//
// # Safety
// As for [`wl_solution_x`].
enum wl_status wl_solution_sigma(const struct wl_solution *s, double *buf, size_t len);

// Copies the upper-bound multipliers into `buf`.
//
// # Safety
// As for [`wl_solution_x`].
enum wl_status wl_solution_nu(const struct wl_solution *s, double *buf, size_t len);

// Copies the lower-bound multipliers into `buf`.
//
// # Safety
// As for [`wl_solution_x`].
enum wl_status wl_solution_kappa(const struct wl_solution *s, double *buf, size_t len);

// Outer iterations performed by the sweep.
//
// # Safety
// `s` must be a live handle.
size_t wl_solution_iterations(const struct wl_solution *s);

// Number of multiplier blocks in the trace.
//
// # Safety
// `s` must be a live handle.
size_t wl_solution_trace_len(const struct wl_solution *s);

// Copies the trace into `mu_buf`/`k_buf` (`len` entries each). Block ends
// are 1-based variable indices.
//
// # Safety
// `s` must be a live handle and both buffers writable for `len` entries.
enum wl_status wl_solution_trace(const struct wl_solution *s,
                                 double *mu_buf,
                                 size_t *k_buf,
                                 size_t len);

// Serializes the solution (without a verification report) to JSON. The
// returned string must be released with [`wl_string_free`].
//
// # Safety
// `s` must be a live handle and `out` writable storage for one pointer.
enum wl_status wl_solution_to_json(const struct wl_solution *s, char **out);

// Runs the independent optimality check of a solution against a problem.
//
// # Safety
// `p` and `s` must be live handles and `out` writable storage for one
// report.
enum wl_status wl_kkt_check(const struct wl_problem *p,
                            const struct wl_solution *s,
                            double tol,
                            struct wl_kkt_report *out);

// Verifies the solution against the problem it was solved from, avoiding a
// second problem handle.
//
// # Safety
// `s` must be a live handle and `out` writable storage for one report.
enum wl_status wl_solution_kkt(const struct wl_solution *s, double tol, struct wl_kkt_report *out);

// Copy of the last error message on this thread, or null when the previous
// call succeeded. Release with [`wl_string_free`].
char *wl_last_error_message(void);

// Releases a string returned by this library; a null pointer is ignored.
//
// # Safety
// `s` must have been returned by this library and not yet freed.
void wl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WATERLADDER_H */
