#ifndef SOPE_SOPE_H
#define SOPE_SOPE_H

/* C interface to the singulation environment, trainer and evaluator.
 *
 * Every call returns a status code. On failure, sope_last_error() returns a
 * one-line message for the calling thread. Strings returned through char**
 * are owned by the caller and released with sope_free_string(). Config
 * arguments are JSON text in the run-config schema. */

#include <stddef.h>
#include <stdint.h>

#if defined(__GNUC__)
#define SOPE_API __attribute__((visibility("default")))
#else
#define SOPE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sope_status {
  SOPE_OK = 0,
  SOPE_ERR_CONFIG = 1,
  SOPE_ERR_INFEASIBLE_LAYOUT = 2,
  SOPE_ERR_NUMERICAL_BLOWUP = 3,
  SOPE_ERR_NONFINITE_LOSS = 4,
  SOPE_ERR_CHECKPOINT_MISMATCH = 5,
  SOPE_ERR_IO = 6,
  SOPE_ERR_INVALID_ARGUMENT = 7,
  SOPE_ERR_INTERNAL = 8
} sope_status;

SOPE_API const char* sope_version(void);
SOPE_API const char* sope_last_error(void);
SOPE_API const char* sope_status_name(sope_status s);
SOPE_API void sope_free_string(char* s);

/* Environment handle. */
typedef struct sope_env sope_env;

/* config_json may be NULL for the defaults. Accepts a full run config or
 * only its "env" object. */
SOPE_API sope_status sope_env_create(const char* config_json, sope_env** out);
SOPE_API void sope_env_destroy(sope_env* env);
SOPE_API int sope_env_obs_dim(const sope_env* env);
SOPE_API int sope_env_action_dim(void);
/* obs receives sope_env_obs_dim() values; capacity is checked. */
SOPE_API sope_status sope_env_reset(sope_env* env, uint64_t seed, double* obs, size_t capacity);
SOPE_API sope_status sope_env_step(sope_env* env, const double* action, size_t action_len, double* obs,
                          size_t capacity, double* reward, int* done);
/* Valid once done. failure: 0 none, 1 isolating, 2 grasp/retrieve, 3 blowup. */
SOPE_API sope_status sope_env_outcome(const sope_env* env, int* success, int* failure, int* target);

/* Loads config_path (NULL for defaults), overlays overrides_json (NULL for
 * none), applies the ablation and validates. Returns the resolved config. */
SOPE_API sope_status sope_resolve_config(const char* config_path, const char* overrides_json,
                                char** resolved_json);

/* Trains one seed into out_dir. resume_checkpoint may be NULL. Progress
 * lines go to stderr when verbose is non-zero. */
SOPE_API sope_status sope_train(const char* resolved_json, uint64_t seed, const char* out_dir,
                       const char* resume_checkpoint, int verbose, char** summary_json);

/* Evaluates a checkpoint for every seed in the config. Returns
 * SOPE_ERR_NUMERICAL_BLOWUP when more than 1% of episodes blew up (outputs
 * are still written). */
SOPE_API sope_status sope_eval(const char* resolved_json, const char* checkpoint, const char* out_dir,
                      char** metrics_json);

/* Zero-shot block-count sweep of one or more checkpoints, one table row each. */
SOPE_API sope_status sope_sweep(const char* resolved_json, const char* const* checkpoints, size_t count,
                       const char* out_dir, char** result_json);

/* Scripted swipe-and-pinch baseline for every seed in the config. */
SOPE_API sope_status sope_baseline(const char* resolved_json, const char* out_dir, char** metrics_json);

/* Recomputes rewards of a logged trajectory. mismatches receives the count. */
SOPE_API sope_status sope_replay(const char* trajectory_path, char** report_text, int* mismatches);

#ifdef __cplusplus
}
#endif

#endif /* SOPE_SOPE_H */
