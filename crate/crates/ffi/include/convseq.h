#ifndef CONVSEQ_H
#define CONVSEQ_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum ConvseqStatus {
  CONVSEQ_STATUS_OK = 0,
  CONVSEQ_STATUS_NULL_POINTER = 1,
  CONVSEQ_STATUS_INVALID_ARGUMENT = 2,
  CONVSEQ_STATUS_DIMENSION_MISMATCH = 3,
  CONVSEQ_STATUS_OUT_OF_RANGE = 4,
  CONVSEQ_STATUS_PARSE = 5,
  CONVSEQ_STATUS_IO = 6,
  CONVSEQ_STATUS_BUFFER_TOO_SMALL = 7,
  CONVSEQ_STATUS_PANIC = 8,
} ConvseqStatus;

// Bank of `K` filters of shape `N x M`.
typedef struct ConvseqBank ConvseqBank;

// Trained bank, response traces and loss history.
typedef struct ConvseqFit ConvseqFit;

// Binary spike raster.
typedef struct ConvseqSpikes ConvseqSpikes;

// Training settings. Obtain defaults from [`convseq_fit_config_default`].
typedef struct ConvseqFitConfig {
  size_t n_steps;
  double lrate;
  double beta_tv;
  // NaN selects 0 for one filter and 10 otherwise.
  double beta_xcor;
  // Maximum cross-correlation lag; 0 selects the filter width.
  size_t j;
  uint64_t seed;
} ConvseqFitConfig;

typedef struct ConvseqNullCalibration {
  double mu0;
  double sigma0;
  double alpha;
} ConvseqNullCalibration;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until the
// next call into the library from this thread.
const char *convseq_last_error(void);

// Library version as a static NUL-terminated string.
const char *convseq_version(void);

// Raster from `nnz` (neuron, bin) pairs. Duplicates are merged.
//
// # Safety
// `neurons` and `bins` must point to `nnz` values each; `out` must be writable.
enum ConvseqStatus convseq_spikes_new(size_t n_neurons,
                                      size_t n_bins,
                                      const size_t *neurons,
                                      const size_t *bins,
                                      size_t nnz,
                                      struct ConvseqSpikes **out_spikes);

// Load a raster; `.csv` files are dense, anything else is COO text.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum ConvseqStatus convseq_spikes_load(const char *path, struct ConvseqSpikes **out_spikes);

// # Safety
// `spikes` must be a live handle and `path` a NUL-terminated string.
enum ConvseqStatus convseq_spikes_save(const struct ConvseqSpikes *spikes, const char *path);

// # Safety
// `spikes` must be a live handle; output pointers may be NULL.
enum ConvseqStatus convseq_spikes_dims(const struct ConvseqSpikes *spikes,
                                       size_t *n_neurons,
                                       size_t *n_bins,
                                       size_t *nnz);

// # Safety
// `spikes` must be NULL or a handle not yet freed.
void convseq_spikes_free(struct ConvseqSpikes *spikes);

// Direct filters with softmax rows, raw weights drawn from N(0, 0.01^2).
//
// # Safety
// `out_bank` must be writable.
enum ConvseqStatus convseq_bank_init_direct(size_t n_neurons,
                                            size_t width,
                                            size_t n_filters,
                                            uint64_t seed,
                                            struct ConvseqBank **out_bank);

// Gaussian filters with one learnable mean per row.
//
// # Safety
// `out_bank` must be writable.
enum ConvseqStatus convseq_bank_init_gaussian(size_t n_neurons,
                                              size_t width,
                                              size_t n_filters,
                                              double sigma,
                                              bool normalized,
                                              uint64_t seed,
                                              struct ConvseqBank **out_bank);

// # Safety
// `path` must be a NUL-terminated string; `out_bank` must be writable.
enum ConvseqStatus convseq_bank_load(const char *path, struct ConvseqBank **out_bank);

// # Safety
// `bank` must be a live handle and `path` a NUL-terminated string.
enum ConvseqStatus convseq_bank_save(const struct ConvseqBank *bank, const char *path);

// # Safety
// `bank` must be a live handle; output pointers may be NULL.
enum ConvseqStatus convseq_bank_dims(const struct ConvseqBank *bank,
                                     size_t *n_neurons,
                                     size_t *width,
                                     size_t *n_filters);

// Write filter `k` as an `N x M` row-major matrix into `out` (length `len`).
//
// # Safety
// `bank` must be a live handle; `out` must hold `len` doubles.
enum ConvseqStatus convseq_bank_materialize(const struct ConvseqBank *bank,
                                            size_t k,
                                            double *out_values,
                                            size_t len);

// Neuron order by latency in filter `k`. `order[i]` is the neuron placed at
// row `i`; `latencies[n]` is the latency of neuron `n`. Either may be NULL.
//
// # Safety
// `bank` must be a live handle; non-NULL buffers must hold `len` values.
enum ConvseqStatus convseq_bank_sort(const struct ConvseqBank *bank,
                                     size_t k,
                                     size_t *order,
                                     double *latencies,
                                     size_t len);

// # Safety
// `bank` must be NULL or a handle not yet freed.
void convseq_bank_free(struct ConvseqBank *bank);

struct ConvseqFitConfig convseq_fit_config_default(void);

// Train a copy of `bank` on `spikes`. `config` may be NULL for defaults.
//
// # Safety
// Handles must be live; `out_fit` must be writable.
enum ConvseqStatus convseq_fit(const struct ConvseqSpikes *spikes,
                               const struct ConvseqBank *bank,
                               const struct ConvseqFitConfig *config,
                               struct ConvseqFit **out_fit);

// # Safety
// `fit` must be a live handle; output pointers may be NULL.
enum ConvseqStatus convseq_fit_summary(const struct ConvseqFit *fit,
                                       size_t *steps_run,
                                       size_t *n_filters,
                                       size_t *n_bins,
                                       double *final_loss);

// Copy the response trace of filter `k` (length `T`).
//
// # Safety
// `fit` must be a live handle; `out` must hold `len` doubles.
enum ConvseqStatus convseq_fit_trace(const struct ConvseqFit *fit,
                                     size_t k,
                                     double *out_values,
                                     size_t len);

// New handle holding a copy of the trained bank.
//
// # Safety
// `fit` must be a live handle; `out_bank` must be writable.
enum ConvseqStatus convseq_fit_bank(const struct ConvseqFit *fit, struct ConvseqBank **out_bank);

// # Safety
// `fit` must be NULL or a handle not yet freed.
void convseq_fit_free(struct ConvseqFit *fit);

// Threshold from `n_null` random filters drawn from the same family as
// `family_of` (width, variant, sigma and normalization).
//
// # Safety
// Handles must be live; `out` must be writable.
enum ConvseqStatus convseq_calibrate_null(const struct ConvseqSpikes *spikes,
                                          const struct ConvseqBank *family_of,
                                          size_t n_null,
                                          double z,
                                          uint64_t seed,
                                          struct ConvseqNullCalibration *out_calibration);

// Peaks of `trace` at or above `alpha`, suppressed within `window` bins.
// Writes up to `capacity` bins and stores the total count in `n_found`.
//
// # Safety
// `trace` must hold `len` doubles and `bins` `capacity` values.
enum ConvseqStatus convseq_extract_detections(const double *trace,
                                              size_t len,
                                              double alpha,
                                              size_t window,
                                              size_t *bins,
                                              size_t capacity,
                                              size_t *n_found);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONVSEQ_H */
