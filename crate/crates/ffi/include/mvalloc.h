#ifndef MVALLOC_H
#define MVALLOC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MvStatus {
  MV_STATUS_OK = 0,
  MV_STATUS_NULL_POINTER = 1,
  // A buffer length or argument value was wrong.
  MV_STATUS_INVALID_ARGUMENT = 2,
  MV_STATUS_CONFIG = 3,
  MV_STATUS_DOMAIN = 4,
  MV_STATUS_EPISODE_DONE = 5,
  MV_STATUS_CHECKPOINT = 6,
  MV_STATUS_INTERNAL = 7,
  MV_STATUS_PANIC = 8,
} MvStatus;

// Trained agent handle.
typedef struct MvAgent MvAgent;

// Simulation environment handle.
typedef struct MvEnv MvEnv;

// Summary of one environment step.
typedef struct MvStepResult {
  double reward;
  double pool;
  // Requests posted this step.
  uint32_t posted;
  // Requests served this step.
  uint32_t executed;
  // Served requests that met the immersion threshold.
  uint32_t satisfied;
  double cost;
  bool done;
} MvStepResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failed call on this thread; empty after a
// successful call. Valid until the next call on the same thread.
const char *mv_last_error(void);

// Creates an environment from the built-in preset: cooperative when `coop`
// is true, otherwise independent MSPs.
//
// `out` must be a valid pointer to writable storage for a handle.
enum MvStatus mv_env_new_default(bool coop,
                                 uintptr_t msps,
                                 uintptr_t horizon,
                                 uint64_t seed,
                                 struct MvEnv **out);

// Creates an environment from a run configuration in TOML; only its `env`
// table is used and unset keys take preset defaults.
//
// `toml` must be a NUL-terminated string and `out` a valid pointer.
enum MvStatus mv_env_from_toml(const char *toml, uint64_t seed, struct MvEnv **out);

// Releases an environment. Null is ignored.
//
// `env` must come from this library and not be used afterwards.
void mv_env_free(struct MvEnv *env);

// Starts a new episode.
//
// `env` must be a live handle.
enum MvStatus mv_env_reset(struct MvEnv *env, uint64_t seed);

// Observation vector length; 0 for a null handle.
//
// `env` must be null or a live handle.
uintptr_t mv_env_observation_len(const struct MvEnv *env);

// Action vector length; 0 for a null handle.
//
// `env` must be null or a live handle.
uintptr_t mv_env_action_len(const struct MvEnv *env);

// Whether the current episode has ended; false for a null handle.
//
// `env` must be null or a live handle.
bool mv_env_is_done(const struct MvEnv *env);

// Writes the current observation into `out`, which must hold exactly
// `mv_env_observation_len` values.
//
// `out` must point to `len` writable doubles.
enum MvStatus mv_env_observe(const struct MvEnv *env, double *out, uintptr_t len);

// Advances one step. `action` holds `mv_env_action_len` values in [0, 1]:
// bitrate, frame rate and behavioral accuracy per Head, then one donation
// fraction per MSP in cooperative mode. `result` may be null.
//
// `action` must point to `len` readable doubles; `result`, when not null,
// to a writable struct.
enum MvStatus mv_env_step(struct MvEnv *env,
                          const double *action,
                          uintptr_t len,
                          struct MvStepResult *result);

// Loads a checkpoint written by `mvalloc train`.
//
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum MvStatus mv_agent_load(const char *path, struct MvAgent **out);

// Releases an agent. Null is ignored.
//
// `agent` must come from this library and not be used afterwards.
void mv_agent_free(struct MvAgent *agent);

// Deterministic action for `obs`, written to `action` as values in [0, 1]
// ready for `mv_env_step`.
//
// `obs` must point to `obs_len` readable and `action` to `action_len`
// writable doubles.
enum MvStatus mv_agent_act(const struct MvAgent *agent,
                           const double *obs,
                           uintptr_t obs_len,
                           double *action,
                           uintptr_t action_len);

// Gini coefficient of `len` values; 0 for a null or empty input.
//
// `xs` must point to `len` readable doubles.
double mv_gini(const double *xs, uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MVALLOC_H */
