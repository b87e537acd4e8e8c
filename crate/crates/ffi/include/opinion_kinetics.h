#ifndef OPINION_KINETICS_H
#define OPINION_KINETICS_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Initial distribution selector.
typedef enum OpkInit {
  // Uniform on [-1, 1]; the value argument is ignored.
  OPK_INIT_UNIFORM = 0,
  // Point mass at the value argument.
  OPK_INIT_POINT_MASS = 1,
} OpkInit;

// Result code of every fallible call.
typedef enum OpkStatus {
  OPK_STATUS_OK = 0,
  OPK_STATUS_NULL_POINTER = 1,
  OPK_STATUS_DOMAIN = 2,
  OPK_STATUS_NUMERIC_INSTABILITY = 3,
  OPK_STATUS_DEPTH_TOO_SMALL = 4,
  OPK_STATUS_SCALE_GUARD = 5,
  OPK_STATUS_IO = 6,
  OPK_STATUS_PARSE = 7,
  // A Rust panic was caught at the boundary.
  OPK_STATUS_INTERNAL = 8,
} OpkStatus;

// Check suite selector for `opk_verify`.
typedef enum OpkSuite {
  OPK_SUITE_FAST = 0,
  OPK_SUITE_PAPER = 1,
} OpkSuite;

// Opaque grid density on [-1, 1].
typedef struct OpkGridDensity OpkGridDensity;

// Opaque sample set.
typedef struct OpkSampleSet OpkSampleSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *opk_version(void);

// Length in bytes of the last error message on this thread, excluding the
// terminating NUL; 0 when the last call succeeded.
uintptr_t opk_last_error_length(void);

// Copies the last error message into `buf` (NUL-terminated, truncated to
// `len - 1` bytes). Returns the number of bytes written without the NUL.
uintptr_t opk_last_error_message(char *buf, uintptr_t len);

// Closed-form mean `m_t`.
enum OpkStatus opk_mean_at(double t, double m0, double mu_minus, double mu_plus, double *m_out);

// Second moment `q_t` with quadrature step 1e-3.
enum OpkStatus opk_second_moment_at(double t,
                                    double q0,
                                    double m0,
                                    double mu_minus,
                                    double mu_plus,
                                    double *q_out);

// Equilibrium variance `mu (1 - m0^2) / (2 - mu)`.
enum OpkStatus opk_stationary_variance(double mu, double m0, double *var_out);

// Equilibrium characteristic function at `xi`.
enum OpkStatus opk_char_fn_equilibrium(double mu,
                                       double m0,
                                       uintptr_t n_terms,
                                       double xi,
                                       double *re_out,
                                       double *im_out);

// Lebesgue measure of the level-`n` Cantor set.
enum OpkStatus opk_cantor_total_length(double mu, uint32_t n, double *len_out);

enum OpkStatus opk_hausdorff_dimension(double mu, double *dim_out);

// Draws `n` samples of the truncated equilibrium series.
enum OpkStatus opk_sample_equilibrium(double mu,
                                      double m0,
                                      double eps_trunc,
                                      uintptr_t n,
                                      uint64_t seed,
                                      struct OpkSampleSet **set_out);

// Final state of an agent simulation with `n` agents.
enum OpkStatus opk_simulate_abm(uintptr_t n,
                                double t_end,
                                double mu_minus,
                                double mu_plus,
                                enum OpkInit init,
                                double init_value,
                                uint64_t seed,
                                struct OpkSampleSet **set_out);

// Final state of `n` mean-field particles.
enum OpkStatus opk_simulate_particles(uintptr_t n,
                                      double t_end,
                                      double mu_minus,
                                      double mu_plus,
                                      enum OpkInit init,
                                      double init_value,
                                      uint64_t seed,
                                      struct OpkSampleSet **set_out);

// Copies `len` values from `values` into a new sample set.
enum OpkStatus opk_sample_set_from_values(const double *values,
                                          uintptr_t len,
                                          struct OpkSampleSet **set_out);

// Number of values; 0 for a null handle.
uintptr_t opk_sample_set_len(const struct OpkSampleSet *set);

// Copies up to `len` values into `buf`; returns the number copied.
uintptr_t opk_sample_set_copy(const struct OpkSampleSet *set, double *buf, uintptr_t len);

// Sample mean and population variance.
enum OpkStatus opk_sample_set_moments(const struct OpkSampleSet *set,
                                      double *mean_out,
                                      double *var_out);

void opk_sample_set_free(struct OpkSampleSet *set);

enum OpkStatus opk_wasserstein_1(const struct OpkSampleSet *a,
                                 const struct OpkSampleSet *b,
                                 double *w_out);

enum OpkStatus opk_wasserstein_2(const struct OpkSampleSet *a,
                                 const struct OpkSampleSet *b,
                                 double *w_out);

// Kolmogorov-Smirnov distance to Uniform[-1, 1].
enum OpkStatus opk_ks_uniform(const struct OpkSampleSet *a, double *ks_out);

// Uniform density on `n_points` grid nodes.
enum OpkStatus opk_grid_uniform(uintptr_t n_points, struct OpkGridDensity **grid_out);

// Density from `len` nonnegative node values (normalized to unit mass).
enum OpkStatus opk_grid_from_values(const double *values,
                                    uintptr_t len,
                                    struct OpkGridDensity **grid_out);

// Solves the kinetic equation to `t_end` with RK4 step `dt`.
enum OpkStatus opk_solve_pde(const struct OpkGridDensity *rho0,
                             double t_end,
                             double dt,
                             double mu_minus,
                             double mu_plus,
                             double m0,
                             struct OpkGridDensity **grid_out);

uintptr_t opk_grid_len(const struct OpkGridDensity *grid);

// Copies up to `len` node values; returns the number copied.
uintptr_t opk_grid_copy(const struct OpkGridDensity *grid, double *buf, uintptr_t len);

// Trapezoid mean and second moment.
enum OpkStatus opk_grid_moments(const struct OpkGridDensity *grid, double *m_out, double *q_out);

void opk_grid_free(struct OpkGridDensity *grid);

// Runs the check suite; `*passed_out` is 1 when every check passes.
enum OpkStatus opk_verify(enum OpkSuite suite, uint64_t seed, int32_t *passed_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPINION_KINETICS_H */
