/* sohcast — probabilistic battery state-of-health forecasting.
 *
 * C interface to the shared library. All pipeline entry points return 0 on
 * success or one of the SOHCAST_ERR_* codes; the CLI maps these 1:1 onto
 * exit codes. After a failure, sohcast_last_error() describes what went
 * wrong. Handles are opaque and single-threaded; use one context per
 * thread.
 */
#ifndef SOHCAST_H
#define SOHCAST_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#define SOHCAST_OK 0
#define SOHCAST_ERR 1          /* unexpected failure */
#define SOHCAST_ERR_CONFIG 2   /* bad configuration or architecture */
#define SOHCAST_ERR_DATA 3     /* malformed or inconsistent input data */
#define SOHCAST_ERR_TRAINING 4 /* training failed or diverged */
#define SOHCAST_ERR_NO_POOL 5  /* run directory has no trained pool */
#define SOHCAST_ERR_MANIFEST 6 /* manifest corrupt or artifacts missing */

typedef struct sohcast_ctx sohcast_ctx;

const char* sohcast_version(void);

/* Context carries the run configuration and the last error message. */
sohcast_ctx* sohcast_ctx_new(void);
void sohcast_ctx_free(sohcast_ctx* ctx);
const char* sohcast_last_error(const sohcast_ctx* ctx);

/* Flat key=value configuration ('#' comments). Keys and defaults are
 * documented in the project README; sohcast_config_set rejects unknown
 * keys and invalid values. */
int sohcast_config_load(sohcast_ctx* ctx, const char* path);
int sohcast_config_set(sohcast_ctx* ctx, const char* key, const char* value);
int sohcast_config_get(sohcast_ctx* ctx, const char* key, char* buf, size_t buf_len);
int sohcast_config_save(sohcast_ctx* ctx, const char* path);

/* Offline phase: train the leave-one-battery-out model pool into out_dir. */
int sohcast_train(sohcast_ctx* ctx, const char* out_dir);

/* Online phase for one held-out battery: baseline, point stacking and
 * distribution stacking, with reports/calibration/forecast files. */
int sohcast_evaluate(sohcast_ctx* ctx, const char* run_dir, const char* battery_id,
                     const char* out_dir);

/* One-step-ahead forecast CSV using the configured ensemble method. */
int sohcast_forecast(sohcast_ctx* ctx, const char* run_dir, const char* battery_id,
                     const char* out_dir);

/* Proposed-ensemble metrics across test-time noise levels. */
int sohcast_noise_sweep(sohcast_ctx* ctx, const char* run_dir, const char* battery_id,
                        const double* sigmas, size_t n_sigmas, const char* out_dir);

/* Read-only summary of a run directory. On success *text_out receives a
 * malloc'd string; release it with sohcast_string_free. */
int sohcast_report(sohcast_ctx* ctx, const char* run_dir, char** text_out);
void sohcast_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* SOHCAST_H */
