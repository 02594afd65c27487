#ifndef HL_LAB_H
#define HL_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HlStatus {
  HL_STATUS_OK = 0,
  HL_STATUS_NULL_POINTER = 1,
  HL_STATUS_INVALID_INPUT = 2,
  HL_STATUS_GRID = 3,
  HL_STATUS_CFL = 4,
  HL_STATUS_NUMERICAL = 5,
  HL_STATUS_CONFIG = 6,
  HL_STATUS_IO = 7,
  HL_STATUS_BUFFER_TOO_SMALL = 8,
  /**
   * Zero shear with alpha ≤ 1/2: no fluid stationary state exists.
   */
  HL_STATUS_DEGENERATE_FAMILY = 9,
  HL_STATUS_PANIC = 10,
} HlStatus;

typedef enum HlVerdict {
  HL_VERDICT_UNIQUE = 0,
  HL_VERDICT_NON_UNIQUE = 1,
  HL_VERDICT_INCONCLUSIVE = 2,
  /**
   * D(p0) > 0: the equation is not degenerate at t = 0.
   */
  HL_VERDICT_NOT_DEGENERATE = 3,
} HlVerdict;

/**
 * Cell-averaged density on a stress grid.
 */
typedef struct HlField HlField;

/**
 * Result of a time integration.
 */
typedef struct HlTrajectory HlTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hl_version(void);

/**
 * Length in bytes of the calling thread's last error message, without the
 * terminating NUL.
 */
size_t hl_last_error_length(void);

/**
 * Copies the last error message into `buf` (NUL-terminated). Fails with
 * `HL_STATUS_BUFFER_TOO_SMALL` if `len` cannot hold it.
 *
 * # Safety
 * `buf` must point to at least `len` writable bytes.
 */
enum HlStatus hl_last_error_message(char *buf, size_t len);

/**
 * Uniform density on [a, b] over a grid of `n_cells` on [−half_width, half_width].
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives a handle to free
 * with [`hl_field_free`].
 */
enum HlStatus hl_field_uniform(double half_width,
                               size_t n_cells,
                               double a,
                               double b,
                               struct HlField **out);

/**
 * Normal density with the given mean and standard deviation, cell-averaged
 * and renormalized to unit mass on the grid.
 *
 * # Safety
 * As [`hl_field_uniform`].
 */
enum HlStatus hl_field_gaussian(double half_width,
                                size_t n_cells,
                                double mean,
                                double width,
                                struct HlField **out);

/**
 * Field from `n_cells` nonnegative cell averages (not renormalized).
 *
 * # Safety
 * `values` must point to `n_cells` readable doubles; `out` as above.
 */
enum HlStatus hl_field_from_values(double half_width,
                                   size_t n_cells,
                                   const double *values,
                                   struct HlField **out);

/**
 * Number of cells, or 0 for a null handle.
 *
 * # Safety
 * `field` must be null or a live handle.
 */
size_t hl_field_len(const struct HlField *field);

/**
 * Copies the cell averages into `buf`.
 *
 * # Safety
 * `field` must be a live handle and `buf` hold `len` doubles.
 */
enum HlStatus hl_field_values(const struct HlField *field, double *buf, size_t len);

/**
 * Mass, fluidity D, mean stress and absolute first moment of a field.
 *
 * # Safety
 * `field` must be a live handle; each output pointer may be null to skip it.
 */
enum HlStatus hl_field_observables(const struct HlField *field,
                                   double alpha,
                                   double *mass,
                                   double *fluidity,
                                   double *mean_stress,
                                   double *abs_moment);

/**
 * Releases a field handle; null is ignored.
 *
 * # Safety
 * `field` must be null or a handle not yet freed.
 */
void hl_field_free(struct HlField *field);

/**
 * Integrates from `p0` under constant shear `rate` up to `t_end`.
 *
 * # Safety
 * `p0` must be a live handle; `out` receives a handle to free with
 * [`hl_trajectory_free`].
 */
enum HlStatus hl_simulate(const struct HlField *p0,
                          double rate,
                          double alpha,
                          double epsilon,
                          double dt,
                          double t_end,
                          size_t picard_iters,
                          size_t record_every,
                          struct HlTrajectory **out);

/**
 * Number of trace records (one per step plus the initial state), or 0 for
 * a null handle.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t hl_trajectory_records(const struct HlTrajectory *traj);

/**
 * Copies the trace columns t, D, tau and mass. Any column pointer may be
 * null; non-null ones must hold `len` doubles.
 *
 * # Safety
 * `traj` must be a live handle.
 */
enum HlStatus hl_trajectory_trace(const struct HlTrajectory *traj,
                                  double *t,
                                  double *fluidity,
                                  double *tau,
                                  double *mass,
                                  size_t len);

/**
 * First recorded time with D > 0 (0 if D(p0) > 0, the horizon if never).
 *
 * # Safety
 * `traj` must be a live handle, `out` valid.
 */
enum HlStatus hl_trajectory_stagnation_time(const struct HlTrajectory *traj, double *out);

/**
 * New field handle holding the final state.
 *
 * # Safety
 * `traj` must be a live handle; `out` as in [`hl_field_uniform`].
 */
enum HlStatus hl_trajectory_final_field(const struct HlTrajectory *traj, struct HlField **out);

/**
 * Releases a trajectory handle; null is ignored.
 *
 * # Safety
 * `traj` must be null or a handle not yet freed.
 */
void hl_trajectory_free(struct HlTrajectory *traj);

/**
 * Stationary state for shear `b` (b = 0 uses the zero-shear closed form and
 * returns `HL_STATUS_DEGENERATE_FAMILY` when alpha ≤ 1/2). `profile` may be
 * null; otherwise it receives the cell averages as a new field handle.
 *
 * # Safety
 * Output pointers must be valid or null where allowed.
 */
enum HlStatus hl_steady_state(double alpha,
                              double b,
                              double half_width,
                              size_t n_cells,
                              double *fluidity,
                              double *tau,
                              struct HlField **profile);

/**
 * Uniqueness verdict for zero-shear data; `exponent` receives the fitted
 * small-x exponent of F or NaN when none was fitted. May be null.
 *
 * # Safety
 * `p0` must be a live handle, `verdict` valid.
 */
enum HlStatus hl_classify(const struct HlField *p0,
                          double alpha,
                          enum HlVerdict *verdict,
                          double *exponent);

/**
 * Runs a scenario from TOML text, as the `hl-lab` binary does. `scenario`
 * may be null to use the one declared in the text. Relative input paths
 * resolve against `base_dir` (null for the working directory).
 *
 * # Safety
 * String arguments must be NUL-terminated UTF-8 or null where allowed.
 */
enum HlStatus hl_run_config(const char *config_text,
                            const char *scenario,
                            const char *base_dir,
                            const char *out_dir);

/**
 * Numeric value of a status, for bindings that cannot use the enum.
 */
int hl_status_code(enum HlStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HL_LAB_H */
