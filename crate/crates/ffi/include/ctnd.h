#ifndef CTND_H
#define CTND_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CtndStatus {
  CTND_STATUS_OK = 0,
  CTND_STATUS_NULL_POINTER = 1,
  CTND_STATUS_INVALID_UTF8 = 2,
  CTND_STATUS_PARSE_ERROR = 3,
  CTND_STATUS_INVALID_ARGUMENT = 4,
  CTND_STATUS_INFEASIBLE = 5,
  CTND_STATUS_SOLVER_ERROR = 6,
  CTND_STATUS_MODEL_ERROR = 7,
  CTND_STATUS_IO_ERROR = 8,
  CTND_STATUS_PANIC = 9,
} CtndStatus;

/**
 * Values accepted by the `emphasis` argument of the solve functions. The
 * argument itself is a plain `int32_t` so that out-of-range values can be
 * rejected instead of being undefined behaviour.
 */
typedef enum CtndEmphasis {
  CTND_EMPHASIS_OFF = 0,
  CTND_EMPHASIS_AGGRESSIVE = 1,
} CtndEmphasis;

typedef struct CtndInstance CtndInstance;

typedef struct CtndModel CtndModel;

typedef struct CtndTrajectory CtndTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into this library on the same
 * thread.
 */
const char *ctnd_last_error_message(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed; null is ignored.
 */
void ctnd_string_free(char *s);

/**
 * Parses the text instance format.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum CtndStatus ctnd_instance_parse(const char *text, struct CtndInstance **out);

/**
 * Seeded set-covering instance with `n_rows <= n_vars`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CtndStatus ctnd_instance_generate_covering(uint64_t seed,
                                                size_t n_vars,
                                                size_t n_rows,
                                                struct CtndInstance **out);

/**
 * Seeded multi-dimensional knapsack instance.
 *
 * # Safety
 * `out` must be writable.
 */
enum CtndStatus ctnd_instance_generate_knapsack(uint64_t seed,
                                                size_t n_items,
                                                size_t n_dims,
                                                struct CtndInstance **out);

/**
 * Serializes to the text format. Free the result with `ctnd_string_free`.
 *
 * # Safety
 * `instance` must be live; `out` must be writable.
 */
enum CtndStatus ctnd_instance_serialize(const struct CtndInstance *instance, char **out);

/**
 * Number of variables, or 0 for null.
 *
 * # Safety
 * `instance` must be live or null.
 */
size_t ctnd_instance_num_vars(const struct CtndInstance *instance);

/**
 * Number of binary variables (the length of a prediction), or 0 for null.
 *
 * # Safety
 * `instance` must be live or null.
 */
size_t ctnd_instance_num_binary(const struct CtndInstance *instance);

/**
 * # Safety
 * `instance` must come from this library and not have been freed; null is
 * ignored.
 */
void ctnd_instance_free(struct CtndInstance *instance);

/**
 * Freshly initialised model with hidden width `hidden`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CtndStatus ctnd_model_new(size_t hidden, uint64_t seed, struct CtndModel **out);

/**
 * Reads a model file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CtndStatus ctnd_model_load(const char *path, struct CtndModel **out);

/**
 * Writes a model file.
 *
 * # Safety
 * `model` must be live; `path` must be a NUL-terminated string.
 */
enum CtndStatus ctnd_model_save(const struct CtndModel *model, const char *path);

/**
 * Writes `P(x_j = 1)` for each binary variable of `instance`, in variable
 * order, into `probs[0..len]`. `len` must equal
 * `ctnd_instance_num_binary(instance)`.
 *
 * # Safety
 * `model` and `instance` must be live; `probs` must have room for `len`
 * doubles.
 */
enum CtndStatus ctnd_model_predict(const struct CtndModel *model,
                                   const struct CtndInstance *instance,
                                   double *probs,
                                   size_t len);

/**
 * # Safety
 * `model` must come from this library and not have been freed; null is
 * ignored.
 */
void ctnd_model_free(struct CtndModel *model);

/**
 * Branch and bound with `n_fixings` binary fixings
 * `fix_vars[k] := fix_values[k] != 0`. Returns `CTND_STATUS_INFEASIBLE` when
 * the fixed problem has no feasible point.
 *
 * # Safety
 * `instance` must be live; the fixing arrays must hold `n_fixings` entries
 * (they may be null when `n_fixings` is 0); `out` must be writable.
 */
enum CtndStatus ctnd_solve(const struct CtndInstance *instance,
                           const size_t *fix_vars,
                           const uint8_t *fix_values,
                           size_t n_fixings,
                           uint64_t step_limit,
                           int32_t emphasis,
                           struct CtndTrajectory **out);

/**
 * Predicts, fixes at threshold `t`, solves, and falls back to the unfixed
 * problem when the fixed one is infeasible. `fell_back` may be null.
 *
 * # Safety
 * `instance` and `model` must be live; `out` must be writable; `fell_back`
 * must be writable or null.
 */
enum CtndStatus ctnd_dive_and_solve(const struct CtndInstance *instance,
                                    const struct CtndModel *model,
                                    double t,
                                    uint64_t step_limit,
                                    int32_t emphasis,
                                    struct CtndTrajectory **out,
                                    bool *fell_back);

/**
 * Number of incumbent events, or 0 for null.
 *
 * # Safety
 * `traj` must be live or null.
 */
size_t ctnd_trajectory_len(const struct CtndTrajectory *traj);

/**
 * Step and objective of event `k`.
 *
 * # Safety
 * `traj` must be live; `step` and `objective` must be writable.
 */
enum CtndStatus ctnd_trajectory_event(const struct CtndTrajectory *traj,
                                      size_t k,
                                      uint64_t *step,
                                      double *objective);

/**
 * Whether the search closed the tree.
 *
 * # Safety
 * `traj` must be live or null.
 */
bool ctnd_trajectory_proved_optimal(const struct CtndTrajectory *traj);

/**
 * # Safety
 * `traj` must come from this library and not have been freed; null is
 * ignored.
 */
void ctnd_trajectory_free(struct CtndTrajectory *traj);

/**
 * Area between the primal bound and `reference` over `[0, step_limit]`,
 * charging `no_incumbent_value` before the first incumbent.
 *
 * # Safety
 * `traj` must be live; `out` must be writable.
 */
enum CtndStatus ctnd_primal_integral(const struct CtndTrajectory *traj,
                                     uint64_t step_limit,
                                     double reference,
                                     double no_incumbent_value,
                                     double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTND_H */
