/* swarmlab C ABI. Regenerate with: cbindgen --crate swarmlab-capi --output include/swarmlab.h */

#ifndef SWARMLAB_H
#define SWARMLAB_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status code returned by every entry point.
 */
typedef enum SlStatus {
  SL_STATUS_OK = 0,
  SL_STATUS_NULL_POINTER = 1,
  SL_STATUS_INVALID_ARGUMENT = 2,
  SL_STATUS_UTF8_ERROR = 3,
  SL_STATUS_CONFIG_ERROR = 4,
  SL_STATUS_RUN_FAILED = 5,
  /*
   The run finished but at least one enabled check failed.
   */
  SL_STATUS_CHECKS_FAILED = 6,
} SlStatus;

/*
 Opaque communication-kernel handle.
 */
typedef struct SlKernel SlKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread; valid until the next call
 into this library from the same thread.
 */
const char *sl_last_error_message(void);

/*
 Library version as a static null-terminated string.
 */
const char *sl_version(void);

/*
 Create a heavy-tail kernel `c_k (1 + r)^-beta`.

 # Safety
 `out` must point to writable storage for one pointer.
 */
enum SlStatus sl_kernel_heavy_tail(double beta,
                                   double c_k,
                                   double r_scale,
                                   uintptr_t dim,
                                   struct SlKernel **out);

/*
 Create a singular-head kernel `r^-(d + 2 s p)` with a heavy tail of order
 `beta`, regularized below `eps_sing`.

 # Safety
 `out` must point to writable storage for one pointer.
 */
enum SlStatus sl_kernel_singular(double s,
                                 double p,
                                 double beta,
                                 double r_scale,
                                 uintptr_t dim,
                                 double eps_sing,
                                 struct SlKernel **out);

/*
 Create a matrix kernel `c_k (1 + r)^-beta A` from a row-major `dim x dim`
 symmetric positive-definite profile.

 # Safety
 `aniso` must point to `dim * dim` readable doubles; `out` to one pointer.
 */
enum SlStatus sl_kernel_matrix(double beta,
                               double c_k,
                               const double *aniso,
                               uintptr_t dim,
                               struct SlKernel **out);

/*
 Create a tabulated kernel from parallel `(r, phi)` arrays with strictly
 increasing `r`.

 # Safety
 `rs` and `phis` must point to `len` readable doubles; `out` to one
 pointer.
 */
enum SlStatus sl_kernel_tabulated(const double *rs,
                                  const double *phis,
                                  uintptr_t len,
                                  uintptr_t dim,
                                  struct SlKernel **out);

/*
 Destroy a kernel handle. Passing null is a no-op.

 # Safety
 `kernel` must be a pointer previously returned by a `sl_kernel_*`
 constructor and not yet freed.
 */
void sl_kernel_free(struct SlKernel *kernel);

/*
 Evaluate a scalar kernel at points `x`, `y` of the kernel's dimension.

 # Safety
 `x` and `y` must point to at least `dim` readable doubles; `out` to one
 writable double.
 */
enum SlStatus sl_kernel_evaluate(const struct SlKernel *kernel,
                                 const double *x,
                                 const double *y,
                                 double *out);

/*
 Decreasing envelope `k(r)` of a kernel.

 # Safety
 `out` must point to one writable double.
 */
enum SlStatus sl_kernel_envelope(const struct SlKernel *kernel, double r, double *out);

/*
 Run one experiment config file; artifacts (trace CSV, report JSON,
 resolved config, manifest) are written under `out_dir` (or the config's
 own output directory when `out_dir` is null). `threads = 0` uses all
 cores; any value yields bitwise-identical traces. `all_pass` receives
 whether every enabled check passed.

 # Safety
 `config_path` must be a readable null-terminated path; `out_dir` null or
 null-terminated; `all_pass` null or writable.
 */
enum SlStatus sl_run_config(const char *config_path,
                            const char *out_dir,
                            uintptr_t threads,
                            bool *all_pass);

/*
 Run a built-in suite (`paper-props`, `conservation`, `decay-rates`).

 # Safety
 `name` must be null-terminated; `out_dir` null or null-terminated;
 `all_pass` null or writable.
 */
enum SlStatus sl_run_suite(const char *name,
                           const char *out_dir,
                           uintptr_t threads,
                           bool *all_pass);

/*
 Least-squares power-law fit `y ~ amplitude * t^exponent` over raw points
 (t > 0, y > 0); `residual` receives the RMS of the log-log fit.

 # Safety
 `ts` and `ys` must point to `len` readable doubles; the three out
 pointers must each be null or writable.
 */
enum SlStatus sl_fit_power_law(const double *ts,
                               const double *ys,
                               uintptr_t len,
                               double *exponent,
                               double *amplitude,
                               double *residual);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SWARMLAB_H */
