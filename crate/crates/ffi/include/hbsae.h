#ifndef HBSAE_H
#define HBSAE_H

#include <stddef.h>
#include <stdint.h>

// Status codes returned by every fallible function.
typedef enum HbsaeStatus {
  HBSAE_STATUS_OK = 0,
  // Invalid argument or option.
  HBSAE_STATUS_USAGE = 2,
  // The data fail model validation.
  HBSAE_STATUS_VALIDATION = 3,
  // A required pointer was null.
  HBSAE_STATUS_NULL_POINTER = 4,
  // An internal panic was caught at the boundary.
  HBSAE_STATUS_PANIC = 5,
} HbsaeStatus;

// Census frame handle.
typedef struct HbsaeCensus HbsaeCensus;

// Estimation result handle.
typedef struct HbsaeEstimate HbsaeEstimate;

// Survey sample handle.
typedef struct HbsaeSample HbsaeSample;

// Estimation settings. Initialise with `hbsae_options_default`.
typedef struct HbsaeOptions {
  // Posterior draws H.
  size_t draws;
  // Grid resolution R.
  size_t grid;
  double epsilon;
  // Credible level in (0, 1).
  double level;
  uint64_t seed;
  // Poverty line in welfare units.
  double poverty_line;
  // 0 identity, 1 log shift by `shift`.
  uint32_t transform;
  double shift;
} HbsaeOptions;

// Posterior summary of one area and indicator.
typedef struct HbsaeSummary {
  int64_t area;
  // Position of the indicator's alpha in the list passed to the estimate.
  size_t indicator;
  double mean;
  double sd;
  // `sd / mean`; NaN when undefined.
  double cv;
  double et_lower;
  double et_upper;
  double hpd_lower;
  double hpd_upper;
  size_t sample_size;
  uint64_t population;
} HbsaeSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next call into this library on the same thread.
const char *hbsae_last_error(void);

// Fills `out` with the default estimation settings.
//
// # Safety
// `out` must point to writable memory for one `HbsaeOptions`.
enum HbsaeStatus hbsae_options_default(struct HbsaeOptions *out);

// Builds a sample of `n` units with `p` covariates each. `covariates` is
// row-major `n × p` and must include the intercept column when wanted.
// `het_weights` and `survey_weights` may be null, meaning all ones.
//
// # Safety
// Non-null array arguments must hold `n` (or `n * p`) elements and `out`
// must be writable.
enum HbsaeStatus hbsae_sample_new(size_t n,
                                  size_t p,
                                  const int64_t *areas,
                                  const double *welfare,
                                  const double *het_weights,
                                  const double *survey_weights,
                                  const double *covariates,
                                  struct HbsaeSample **out);

// Number of units in a sample, or 0 for a null handle.
//
// # Safety
// `sample` must be null or a live handle.
size_t hbsae_sample_len(const struct HbsaeSample *sample);

// Builds a census of `rows` non-sampled covariate patterns. Each row has an
// area, a unit count and `p` covariates (row-major). Area sizes are the
// counts plus the sampled units. `het_weights` may be null.
//
// # Safety
// `sample` must be a live handle; arrays must hold `rows` (or `rows * p`)
// elements; `out` must be writable.
enum HbsaeStatus hbsae_census_new(const struct HbsaeSample *sample,
                                  size_t rows,
                                  size_t p,
                                  const int64_t *areas,
                                  const uint64_t *counts,
                                  const double *het_weights,
                                  const double *covariates,
                                  struct HbsaeCensus **out);

// Runs the estimate for FGT indicators with the given alphas.
//
// # Safety
// `sample` and `census` must be live handles; `alphas` must hold
// `alpha_count` values; `options` may be null for the defaults but then
// no poverty line is set and the call fails; `out` must be writable.
enum HbsaeStatus hbsae_estimate(const struct HbsaeSample *sample,
                                const struct HbsaeCensus *census,
                                const double *alphas,
                                size_t alpha_count,
                                const struct HbsaeOptions *options,
                                struct HbsaeEstimate **out);

// Number of summary rows (areas × indicators), or 0 for a null handle.
//
// # Safety
// `estimate` must be null or a live handle.
size_t hbsae_estimate_len(const struct HbsaeEstimate *estimate);

// Copies summary row `index` into `out`. Rows are ordered by area, then by
// indicator.
//
// # Safety
// `estimate` must be a live handle and `out` writable.
enum HbsaeStatus hbsae_estimate_summary(const struct HbsaeEstimate *estimate,
                                        size_t index,
                                        struct HbsaeSummary *out);

// Releases a sample. Null is ignored.
//
// # Safety
// `sample` must be null or a handle not yet freed.
void hbsae_sample_free(struct HbsaeSample *sample);

// Releases a census. Null is ignored.
//
// # Safety
// `census` must be null or a handle not yet freed.
void hbsae_census_free(struct HbsaeCensus *census);

// Releases an estimate. Null is ignored.
//
// # Safety
// `estimate` must be null or a handle not yet freed.
void hbsae_estimate_free(struct HbsaeEstimate *estimate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HBSAE_H */
