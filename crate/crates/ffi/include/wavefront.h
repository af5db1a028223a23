/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef WAVEFRONT_H
#define WAVEFRONT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WfStatus {
  WF_STATUS_OK = 0,
  WF_STATUS_NULL_POINTER = 1,
  WF_STATUS_INVALID_ARGUMENT = 2,
  WF_STATUS_UNKNOWN_MODEL = 3,
  WF_STATUS_INVALID_DATA = 4,
  WF_STATUS_TRACKING_FAILED = 5,
  WF_STATUS_OUT_OF_SPAN = 6,
  WF_STATUS_IO = 7,
  WF_STATUS_PANIC = 8,
} WfStatus;

typedef struct WfModel WfModel;

typedef struct WfTrajectory WfTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *wf_version(void);

/**
 * Copies the last error message of this thread into `buf` (truncated,
 * always NUL-terminated when `cap > 0`). Returns the full length
 * including the terminator.
 *
 * # Safety
 * `buf` must be valid for `cap` bytes or null with `cap == 0`.
 */
size_t wf_last_error(char *buf, size_t cap);

/**
 * Creates a built-in model (`decoupled`, `aw-rascle`, `ld-ld`) with default
 * parameters.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum WfStatus wf_model_new(const char *name, struct WfModel **out);

/**
 * # Safety
 * `model` must come from [`wf_model_new`] and not be used afterwards.
 */
void wf_model_free(struct WfModel *model);

/**
 * # Safety
 * Pointers must be valid.
 */
enum WfStatus wf_model_dim(const struct WfModel *model, size_t *out);

/**
 * Writes whether family `i` is linearly degenerate.
 *
 * # Safety
 * Pointers must be valid.
 */
enum WfStatus wf_model_is_linearly_degenerate(const struct WfModel *model, size_t i, bool *out);

/**
 * Writes the domain box bounds; `lo` and `hi` hold `dim` entries each.
 *
 * # Safety
 * `lo` and `hi` must be valid for `dim` writes.
 */
enum WfStatus wf_model_domain(const struct WfModel *model, double *lo, double *hi);

/**
 * Tracks step data with `n_breaks` breakpoints and `n_breaks + 1` states
 * (projected onto the grid of level `nu`) up to `t_end`.
 *
 * # Safety
 * `xs` must hold `n_breaks` values, `states` `(n_breaks + 1) * dim` values,
 * and `out` must be valid.
 */
enum WfStatus wf_simulate(const struct WfModel *model,
                          uint32_t nu,
                          const double *xs,
                          size_t n_breaks,
                          const double *states,
                          double t_end,
                          struct WfTrajectory **out);

/**
 * # Safety
 * `traj` must come from [`wf_simulate`] and not be used afterwards.
 */
void wf_trajectory_free(struct WfTrajectory *traj);

/**
 * # Safety
 * Pointers must be valid.
 */
enum WfStatus wf_trajectory_event_count(const struct WfTrajectory *traj, size_t *out);

/**
 * Number of fronts alive at time `t`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum WfStatus wf_trajectory_front_count(const struct WfTrajectory *traj, double t, size_t *out);

/**
 * # Safety
 * Pointers must be valid.
 */
enum WfStatus wf_trajectory_end_time(const struct WfTrajectory *traj, double *out);

/**
 * Total variation and interaction potential at the final time, in grid
 * units.
 *
 * # Safety
 * Pointers must be valid.
 */
enum WfStatus wf_trajectory_monitors(const struct WfTrajectory *traj, int64_t *tv, int64_t *q);

/**
 * Largest relative change of the conserved integral across one interaction.
 *
 * # Safety
 * Pointers must be valid.
 */
enum WfStatus wf_trajectory_max_mass_defect(const struct WfTrajectory *traj, double *out);

/**
 * Samples the solution at time `t` at `n` points; writes `n * dim` real
 * Riemann coordinates to `states`. Points on a front take the right state.
 *
 * # Safety
 * `xs` must hold `n` values and `states` room for `n * dim`.
 */
enum WfStatus wf_trajectory_sample(const struct WfTrajectory *traj,
                                   double t,
                                   const double *xs,
                                   size_t n,
                                   double *states);

/**
 * Writes the interaction log as CSV.
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum WfStatus wf_trajectory_write_event_log(const struct WfTrajectory *traj, const char *path);

/**
 * Runs a TOML scenario and writes its artifacts into `out_dir`; the number
 * of invariant violations goes to `violations`.
 *
 * # Safety
 * Strings must be NUL-terminated and `violations` valid.
 */
enum WfStatus wf_scenario_run(const char *path, const char *out_dir, size_t *violations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WAVEFRONT_H */
