/* Public C API of the risk-field navigation engine.
 *
 * The engine lives in a shared library; this header is the only interface a
 * client needs. All handles are opaque, all functions return an rf_status,
 * and the last error message is kept per thread. Strings returned through
 * char** outputs are heap-allocated and must be released with
 * rf_string_free().
 */
#ifndef RISKFIELD_H
#define RISKFIELD_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define RF_API __declspec(dllexport)
#else
#define RF_API __attribute__((visibility("default")))
#endif

typedef enum rf_status {
  RF_OK = 0,
  RF_ERR_INVALID_ARGUMENT = 1,
  RF_ERR_RUNTIME = 2,
  RF_ERR_CHECK_FAILED = 3,
  RF_ERR_IO = 4,
} rf_status;

/* Library version string, e.g. "0.1.0". */
RF_API const char* rf_version(void);

/* Message of the last error raised on the calling thread; empty when none. */
RF_API const char* rf_last_error(void);

RF_API void rf_string_free(char* s);

/* ------------------------------------------------------------------ */
/* Configuration                                                       */

/* Full default configuration tree as JSON; enumerates every key. */
RF_API rf_status rf_default_config(char** json_out);

/* ------------------------------------------------------------------ */
/* World patches                                                       */

typedef struct rf_patch rf_patch;

/* Builds a scenario world from a scenario spec JSON (see rf_default_config
 * for the geometry keys; the spec needs "regime" and "seed"). */
RF_API rf_status rf_patch_create(const char* scenario_json, rf_patch** out);

enum { RF_FIELD_SOFT_RISK = 0, RF_FIELD_SDF = 1 };

/* Bilinear sample of a field: value and spatial gradient at a world
 * position. clamped_out is 1 when the position fell outside the patch. */
RF_API rf_status rf_patch_sample(const rf_patch* patch, double x, double y, int field,
                                 double* value_out, double* grad_out /* double[2] */,
                                 int* clamped_out);

/* Writes <stem>_risk.csv, <stem>_sdf.csv, <stem>_traversable.csv. */
RF_API rf_status rf_patch_export_csv(const rf_patch* patch, const char* dir, const char* stem);

/* Start/goal/d_safe and the event step resolved by the generator. */
RF_API rf_status rf_patch_scenario_json(const rf_patch* patch, char** json_out);

RF_API void rf_patch_destroy(rf_patch* patch);

/* ------------------------------------------------------------------ */
/* Rollouts                                                            */

typedef struct rf_rollout rf_rollout;

/* Runs one episode on the patch. params_json holds FieldParams overrides
 * (may be "{}"); options_json may set {"variant": name} plus integrator and
 * gate overrides. */
RF_API rf_status rf_rollout_run(const rf_patch* patch, const char* params_json,
                                const char* options_json, rf_rollout** out);

/* Summary JSON: status, steps, accumulators, episode cost. */
RF_API rf_status rf_rollout_summary(const rf_rollout* rollout, char** json_out);

/* Trajectory CSV: t, qx, qy, px, py, m_feas, |F_soft|, |F_hard|, risk, phi. */
RF_API rf_status rf_rollout_export_csv(const rf_rollout* rollout, const char* path);

RF_API void rf_rollout_destroy(rf_rollout* rollout);

/* ------------------------------------------------------------------ */
/* Objective helpers                                                   */

/* Detached-quantile empirical CVaR of a cost batch. */
RF_API rf_status rf_cvar(const double* costs, size_t n, double alpha, double* value_out,
                         double* eta_out);

/* DKW upper-confidence CVaR bound over m channels. */
RF_API rf_status rf_cvar_upper_bound(const double* costs, size_t n, double alpha, double c_max,
                                     double delta, int m_channels, double* value_out);

/* ------------------------------------------------------------------ */
/* Command entry points (what the CLI calls)                           */

/* Each takes a full config JSON (defaults merged with user overrides).
 * message_out (optional) receives a human-readable summary. */
RF_API rf_status rf_cmd_generate(const char* config_json, char** message_out);
RF_API rf_status rf_cmd_train(const char* config_json, char** message_out);
RF_API rf_status rf_cmd_eval(const char* config_json, char** message_out);
RF_API rf_status rf_cmd_theory(const char* config_json, char** message_out);
RF_API rf_status rf_cmd_export(const char* config_json, char** message_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* RISKFIELD_H */
