#ifndef SOUNDSCAPE_H
#define SOUNDSCAPE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Number of values in each half of [`SsIndexRecord`].
#define SS_N_INDICES 14

typedef enum SsModel {
  SS_MODEL_FULL = 0,
  SS_MODEL_NO_INHERENT = 1,
  SS_MODEL_NO_RAIN = 2,
  SS_MODEL_NO_RANDOM = 3,
  SS_MODEL_BASIC = 4,
} SsModel;

typedef enum SsStatus {
  SS_STATUS_OK = 0,
  SS_STATUS_NULL_POINTER = 1,
  SS_STATUS_INVALID_ARGUMENT = 2,
  SS_STATUS_DECODE = 3,
  SS_STATUS_CHANNEL = 4,
  SS_STATUS_FORMAT = 5,
  SS_STATUS_SILENT_RECORDING = 6,
  SS_STATUS_BOUNDARY = 7,
  SS_STATUS_IO = 8,
  SS_STATUS_NUMERICAL = 9,
  SS_STATUS_CHAIN_DIVERGENCE = 10,
  SS_STATUS_INSUFFICIENT_DRAWS = 11,
  SS_STATUS_DATA = 12,
  SS_STATUS_PANIC = 13,
} SsStatus;

typedef struct SsAudio SsAudio;

typedef struct SsDataset SsDataset;

typedef struct SsDraws SsDraws;

// Raw indices (H, ACI, NDSI, AEI, PSD1..PSD10) and their transforms.
typedef struct SsIndexRecord {
  double raw[SS_N_INDICES];
  double transformed[SS_N_INDICES];
} SsIndexRecord;

typedef struct SsSamplerConfig {
  uint64_t iterations;
  uint64_t burn_in;
  uint64_t thin;
  uint64_t chains;
  uint64_t seed;
} SsSamplerConfig;

typedef struct SsWaic {
  double lppd;
  double p_waic;
  double waic;
} SsWaic;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after success.
// Valid until the next `ss_*` call on the same thread.
const char *ss_last_error_message(void);

// `ln((x - a) / (b - x))` for `a < x < b`.
//
// # Safety
// `out` must be a valid pointer to a double.
enum SsStatus ss_bounded_logit(double x, double a, double b, double *out);

// Audio from samples in [-1, 1].
//
// # Safety
// `samples` must point to `len` doubles; `out` must be valid.
enum SsStatus ss_audio_from_samples(const double *samples,
                                    uintptr_t len,
                                    uint32_t sample_rate,
                                    struct SsAudio **out);

// Decode a 16-bit mono PCM WAV file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be valid.
enum SsStatus ss_audio_read_wav(const char *path, struct SsAudio **out);

// Number of samples, or 0 for a null handle.
//
// # Safety
// `audio` must be null or a live handle.
uintptr_t ss_audio_len(const struct SsAudio *audio);

// # Safety
// `audio` must be null or a handle not yet freed.
void ss_audio_free(struct SsAudio *audio);

// All fourteen indices with default settings.
//
// # Safety
// `audio` must be a live handle and `out` valid.
enum SsStatus ss_compute_indices(const struct SsAudio *audio, struct SsIndexRecord *out);

// Load a dataset written by `soundscape assemble` or `simulate`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be valid.
enum SsStatus ss_dataset_load(const char *path, struct SsDataset **out);

// # Safety
// `data` must be null or a live handle.
uintptr_t ss_dataset_n_individuals(const struct SsDataset *data);

// # Safety
// `data` must be null or a live handle.
uintptr_t ss_dataset_n_recordings(const struct SsDataset *data);

// # Safety
// `data` must be null or a handle not yet freed.
void ss_dataset_free(struct SsDataset *data);

// 25000 iterations, 5000 burn-in, thin 1, 3 chains, seed 0.
struct SsSamplerConfig ss_sampler_config_default(void);

// Fit the univariate model to the index named `response`.
//
// # Safety
// Handles and pointers must be valid; `response` NUL-terminated.
enum SsStatus ss_fit_uni(const struct SsDataset *data,
                         const char *response,
                         enum SsModel model,
                         const struct SsSamplerConfig *config,
                         struct SsDraws **out);

// Fit the multivariate model to every index in the dataset.
//
// # Safety
// Handles and pointers must be valid.
enum SsStatus ss_fit_multi(const struct SsDataset *data,
                           enum SsModel model,
                           const struct SsSamplerConfig *config,
                           struct SsDraws **out);

// # Safety
// `draws` must be null or a live handle.
uintptr_t ss_draws_n_params(const struct SsDraws *draws);

// Retained draws pooled over chains.
//
// # Safety
// `draws` must be null or a live handle.
uintptr_t ss_draws_n_draws(const struct SsDraws *draws);

// Label of parameter `index`; the string lives as long as the handle.
//
// # Safety
// `draws` must be a live handle and `out` valid.
enum SsStatus ss_draws_label(const struct SsDraws *draws, uintptr_t index, const char **out);

// Copy the pooled draws of parameter `index` into `buf`, which must hold
// `ss_draws_n_draws` values.
//
// # Safety
// `draws` must be a live handle and `buf` must point to `buf_len` doubles.
enum SsStatus ss_draws_column(const struct SsDraws *draws,
                              uintptr_t index,
                              double *buf,
                              uintptr_t buf_len);

// # Safety
// `draws` must be a live handle and `out` valid.
enum SsStatus ss_draws_waic(const struct SsDraws *draws, struct SsWaic *out);

// # Safety
// `draws` must be null or a handle not yet freed.
void ss_draws_free(struct SsDraws *draws);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOUNDSCAPE_H */
