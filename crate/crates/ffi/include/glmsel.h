#ifndef GLMSEL_H
#define GLMSEL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define GLMSEL_OK 0

/*
 Null pointer, bad length or invalid UTF-8.
 */
#define GLMSEL_INVALID_ARGUMENT 1

#define GLMSEL_CONFIG_ERROR 2

#define GLMSEL_DATA_ERROR 3

#define GLMSEL_EMPTY_MODEL 4

#define GLMSEL_NUMERIC_ERROR 5

/*
 A Rust panic was caught at the boundary.
 */
#define GLMSEL_INTERNAL_ERROR 6

#define GLMSEL_METHOD_PPL 0

#define GLMSEL_METHOD_POLYHEDRAL 1

#define GLMSEL_METHOD_NAIVE 2

/*
 Observations and covariates.
 */
typedef struct GlmselDataset GlmselDataset;

/*
 Result of an inference run.
 */
typedef struct GlmselReport GlmselReport;

/*
 One coefficient under one method. Missing values are NaN; infinite CI
 endpoints are IEEE infinities.
 */
typedef struct GlmselCoefficient {
  /*
   1-based column index.
   */
  size_t index;
  /*
   One of the `GLMSEL_METHOD_*` constants.
   */
  int32_t method;
  double estimate;
  double ci_lo;
  double ci_hi;
  double p_value;
  /*
   1 when inference succeeded, 0 when it failed for this entry.
   */
  int32_t ok;
} GlmselCoefficient;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null. The pointer is
 valid until the next failing call on the same thread.
 */
const char *glmsel_last_error(void);

/*
 Builds a dataset from a row-major `n × p` covariate array and `n`
 responses. Both arrays are copied.

 # Safety
 `x` must point to `n * p` doubles (may be null when `p == 0`), `y` to `n`
 doubles, and `out` to writable storage for one pointer.
 */
int32_t glmsel_dataset_new(const double *x,
                           const double *y,
                           size_t n,
                           size_t p,
                           struct GlmselDataset **out);

/*
 # Safety
 `ds` must be null or a handle from [`glmsel_dataset_new`] not yet freed.
 */
void glmsel_dataset_free(struct GlmselDataset *ds);

/*
 Runs selection and inference. `config` is the same flat TOML accepted by
 the command line (`family` required; `response` and `one_hot` ignored).

 # Safety
 `ds` must be a live dataset handle, `config` a NUL-terminated string and
 `out` writable storage for one pointer.
 */
int32_t glmsel_infer(const struct GlmselDataset *ds, const char *config, struct GlmselReport **out);

/*
 Number of coefficient entries (selected covariates × methods).

 # Safety
 `r` must be a live report handle.
 */
size_t glmsel_report_len(const struct GlmselReport *r);

/*
 Penalty used for selection (sum-of-squares scale), NaN for a null handle.

 # Safety
 `r` must be null or a live report handle.
 */
double glmsel_report_lambda(const struct GlmselReport *r);

/*
 # Safety
 `r` must be a live report handle and `out` writable.
 */
int32_t glmsel_report_entry(const struct GlmselReport *r, size_t i, struct GlmselCoefficient *out);

/*
 Full report as JSON; release with [`glmsel_string_free`]. Null on failure.

 # Safety
 `r` must be a live report handle.
 */
char *glmsel_report_json(const struct GlmselReport *r);

/*
 # Safety
 `s` must be null or a string returned by this library not yet freed.
 */
void glmsel_string_free(char *s);

/*
 # Safety
 `r` must be null or a report handle not yet freed.
 */
void glmsel_report_free(struct GlmselReport *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GLMSEL_H */
