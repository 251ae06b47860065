/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef JUMPSDE_H
#define JUMPSDE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum JsdStatus {
  JSD_STATUS_OK = 0,
  JSD_STATUS_NULL_POINTER = 1,
  JSD_STATUS_INVALID_UTF8 = 2,
  /**
   * Invalid model, experiment config or argument.
   */
  JSD_STATUS_CONFIG = 3,
  /**
   * The computation itself failed.
   */
  JSD_STATUS_RUNTIME = 4,
  /**
   * A caller buffer is smaller than the required length.
   */
  JSD_STATUS_BUFFER_TOO_SMALL = 5,
  JSD_STATUS_PANIC = 6,
} JsdStatus;

typedef enum JsdScheme {
  JSD_SCHEME_EULER = 0,
  JSD_SCHEME_TAMED_EULER = 1,
} JsdScheme;

/**
 * Same numbering as the command-line exit codes.
 */
typedef enum JsdVerdict {
  JSD_VERDICT_PASS = 0,
  JSD_VERDICT_FAIL = 2,
  JSD_VERDICT_INCONCLUSIVE = 3,
} JsdVerdict;

/**
 * A built coefficient model.
 */
typedef struct JsdModel JsdModel;

/**
 * A simulated path.
 */
typedef struct JsdTrajectory JsdTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. Owned by
 * the library.
 */
const char *jsd_last_error(void);

/**
 * Library version, static.
 */
const char *jsd_version(void);

/**
 * Release a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void jsd_string_free(char *s);

/**
 * Build a model from its JSON description.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum JsdStatus jsd_model_from_json(const char *json, struct JsdModel **out);

/**
 * Build a builtin model with default parameters.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum JsdStatus jsd_model_builtin(const char *name, struct JsdModel **out);

/**
 * # Safety
 * `model` must come from this library and not have been freed; null is ignored.
 */
void jsd_model_free(struct JsdModel *model);

/**
 * State dimension, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t jsd_model_dim(const struct JsdModel *model);

/**
 * Brownian dimension, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t jsd_model_brownian_dim(const struct JsdModel *model);

/**
 * Evaluate drift (`dim` entries), diffusion (`dim * brownian_dim`, row
 * major) and compensator (`dim`) at `x`. Any output pointer may be null.
 *
 * # Safety
 * `x` must hold `dim` doubles and each non-null output the stated length.
 */
enum JsdStatus jsd_model_eval(const struct JsdModel *model,
                              const double *x,
                              size_t dim,
                              double *drift,
                              double *diffusion,
                              double *compensator);

/**
 * Simulate one path on `[0, horizon]`; the noise is fixed by `(seed, path)`.
 *
 * # Safety
 * `x0` must hold `dim` doubles and `out` be a valid pointer.
 */
enum JsdStatus jsd_simulate(const struct JsdModel *model,
                            const double *x0,
                            size_t dim,
                            double horizon,
                            double dt,
                            enum JsdScheme scheme,
                            double r_explode,
                            uint64_t seed,
                            uint64_t path,
                            struct JsdTrajectory **out);

/**
 * # Safety
 * `traj` must come from this library and not have been freed; null is ignored.
 */
void jsd_trajectory_free(struct JsdTrajectory *traj);

/**
 * Number of reported times, or 0 for a null handle.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t jsd_trajectory_len(const struct JsdTrajectory *traj);

/**
 * State dimension, or 0 for a null handle.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t jsd_trajectory_dim(const struct JsdTrajectory *traj);

/**
 * Copy the `len` reported times into `out`.
 *
 * # Safety
 * `out` must hold `cap` doubles.
 */
enum JsdStatus jsd_trajectory_times(const struct JsdTrajectory *traj, double *out, size_t cap);

/**
 * Copy the states, `len * dim` doubles in time order, into `out`.
 *
 * # Safety
 * `out` must hold `cap` doubles.
 */
enum JsdStatus jsd_trajectory_states(const struct JsdTrajectory *traj, double *out, size_t cap);

/**
 * 1 if the path exploded (time stored in `time` when non-null), else 0.
 *
 * # Safety
 * `traj` must be null or a live handle; `time` null or writable.
 */
int32_t jsd_trajectory_explosion(const struct JsdTrajectory *traj, double *time);

/**
 * Run an experiment from its JSON config; the report JSON goes to `report`
 * (free with [`jsd_string_free`]) and its verdict to `verdict` if non-null.
 *
 * # Safety
 * `config` must be a NUL-terminated string and `report` a valid pointer.
 */
enum JsdStatus jsd_run_experiment(const char *config, char **report, enum JsdVerdict *verdict);

/**
 * Run a pinned suite (`smoke` nonzero for reduced path counts); the suite
 * report JSON goes to `report` and the suite verdict to `verdict`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `report` a valid pointer.
 */
enum JsdStatus jsd_run_suite(const char *name,
                             int32_t smoke,
                             uint64_t seed,
                             char **report,
                             enum JsdVerdict *verdict);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JUMPSDE_H */
