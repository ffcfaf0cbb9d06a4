#ifndef EPOCH_ACTIVE_H
#define EPOCH_ACTIVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum EaStatus {
  EA_STATUS_OK = 0,
  EA_STATUS_NULL_POINTER = 1,
  EA_STATUS_INVALID_ARGUMENT = 2,
  EA_STATUS_IO = 3,
  EA_STATUS_PARSE = 4,
  EA_STATUS_DOMAIN = 5,
  EA_STATUS_INTERNAL = 6,
} EaStatus;

// Parsed experiment configuration.
typedef struct EaConfig EaConfig;

// A trained stitched classifier.
typedef struct EaModel EaModel;

// A surrogate loss.
typedef struct EaSurrogate EaSurrogate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next call into this library on the same thread.
const char *ea_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ea_version(void);

// Parses a JSON experiment configuration.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum EaStatus ea_config_from_json(const char *json, struct EaConfig **out);

// Reads and parses a JSON configuration file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum EaStatus ea_config_load(const char *path, struct EaConfig **out);

// # Safety
// `cfg` must be null or a handle from `ea_config_*` not yet freed.
void ea_config_free(struct EaConfig *cfg);

// Input dimension of the configured instance.
//
// # Safety
// `cfg` must be a live handle; `out` must be writable.
enum EaStatus ea_config_input_dim(const struct EaConfig *cfg, size_t *out);

// Runs the active learner with budget `n` against simulated labels from
// the configured instance and returns the stitched classifier.
//
// # Safety
// `cfg` must be a live handle; `out` must be writable.
enum EaStatus ea_run(const struct EaConfig *cfg, size_t n, uint64_t seed, struct EaModel **out);

// Loads a classifier from a run artifact.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum EaStatus ea_model_load(const char *path, struct EaModel **out);

// # Safety
// `model` must be null or a handle from `ea_run`/`ea_model_load` not yet freed.
void ea_model_free(struct EaModel *model);

// Predicted label (0-based) at `x` of length `d`.
//
// # Safety
// `model` must be a live handle, `x` must point to `d` doubles and `out`
// must be writable.
enum EaStatus ea_model_predict(const struct EaModel *model, const double *x, size_t d, size_t *out);

// Number of epochs and labels queried during training.
//
// # Safety
// `model` must be a live handle; both outputs must be writable.
enum EaStatus ea_model_stats(const struct EaModel *model, size_t *epochs, size_t *queries);

// Final-epoch parameters. Writes the parameter count to `len`; when
// `buf` is non-null and `cap >= *len` the values are copied into it.
//
// # Safety
// `model` must be a live handle, `len` writable and `buf` null or
// writable for `cap` doubles.
enum EaStatus ea_model_params(const struct EaModel *model, double *buf, size_t cap, size_t *len);

// Excess classification risk of the model on the configured instance.
//
// # Safety
// Handles must be live; `value` and `stderr` must be writable.
enum EaStatus ea_model_excess_risk(const struct EaModel *model,
                                   const struct EaConfig *cfg,
                                   size_t mc,
                                   uint64_t seed,
                                   double *value,
                                   double *stderr);

// Squared surrogate.
//
// # Safety
// `out` must be writable.
enum EaStatus ea_surrogate_squared(struct EaSurrogate **out);

// Logistic surrogate with smoothness `beta_phi` and Lipschitz constant `l_phi`.
//
// # Safety
// `out` must be writable.
enum EaStatus ea_surrogate_logistic(double beta_phi, double l_phi, struct EaSurrogate **out);

// # Safety
// `s` must be null or a handle from `ea_surrogate_*` not yet freed.
void ea_surrogate_free(struct EaSurrogate *s);

// Surrogate loss of scores `v` (length `k`) at label `y`.
//
// # Safety
// `s` must be a live handle, `v` must point to `k` doubles and `out` must
// be writable.
enum EaStatus ea_surrogate_loss(const struct EaSurrogate *s,
                                const double *v,
                                size_t k,
                                size_t y,
                                double *out);

// Link `phi(v)` written into `probs` (length `k`).
//
// # Safety
// `s` must be a live handle; `v` and `probs` must each hold `k` doubles.
enum EaStatus ea_surrogate_link(const struct EaSurrogate *s,
                                const double *v,
                                size_t k,
                                double *probs);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EPOCH_ACTIVE_H */
