#ifndef ROBSEL_H
#define ROBSEL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RobselStatus {
  ROBSEL_STATUS_OK = 0,
  ROBSEL_STATUS_NULL_POINTER = 1,
  ROBSEL_STATUS_INVALID_ARGUMENT = 2,
  ROBSEL_STATUS_DOMAIN = 3,
  ROBSEL_STATUS_DIMENSION = 4,
  ROBSEL_STATUS_INVALID_DATA = 5,
  ROBSEL_STATUS_CONFIG = 6,
  ROBSEL_STATUS_IO = 7,
  ROBSEL_STATUS_CSV = 8,
  ROBSEL_STATUS_NON_FINITE = 9,
  ROBSEL_STATUS_PANIC = 10,
} RobselStatus;

// Correction applied by a fit. Passed to the C functions as its integer
// value; anything else yields `ROBSEL_STATUS_INVALID_ARGUMENT`.
typedef enum RobselCondition {
  ROBSEL_CONDITION_FULL_CORRECTION = 0,
  ROBSEL_CONDITION_ERROR_ONLY = 1,
  ROBSEL_CONDITION_MISSING_ONLY = 2,
  ROBSEL_CONDITION_NO_CORRECTION = 3,
} RobselCondition;

// Penalty family, passed as its integer value like [`RobselCondition`].
typedef enum RobselPenalty {
  ROBSEL_PENALTY_LASSO = 0,
  ROBSEL_PENALTY_SCAD = 1,
  ROBSEL_PENALTY_MCP = 2,
  ROBSEL_PENALTY_ATAN = 3,
} RobselPenalty;

// Opaque dataset handle.
typedef struct RobselDataset RobselDataset;

// Opaque handle to a fitted model.
typedef struct RobselFit RobselFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or null if the last
// call succeeded. The pointer stays valid until the next call on this
// thread.
const char *robsel_last_error_message(void);

// Exponential squared loss of residual `r` at tuning parameter `h`.
//
// # Safety
// `out` must be a valid pointer to a writable `double`.
enum RobselStatus robsel_loss(double r, double h, double *out);

// Penalty of `family` at level `f` evaluated at `x`, using the default
// shape parameters.
//
// # Safety
// `out` must be a valid pointer to a writable `double`.
enum RobselStatus robsel_penalty(uint32_t family, double f, double x, double *out);

// Builds a dataset from a response of length `n` and a row-major `n x d`
// design. NaN cells mark absent covariates.
//
// # Safety
// `y` must point to `n` doubles, `x` to `n * d` doubles and `out` to a
// writable handle pointer.
enum RobselStatus robsel_dataset_from_arrays(const double *y,
                                             const double *x,
                                             size_t n,
                                             size_t d,
                                             struct RobselDataset **out);

// Reads a CSV file. `na_token` may be null to accept empty cells and `NA`.
//
// # Safety
// `path` and `response` must be NUL-terminated strings; `na_token` must be
// null or NUL-terminated; `out` must be a writable handle pointer.
enum RobselStatus robsel_dataset_from_csv(const char *path,
                                          const char *response,
                                          const char *na_token,
                                          struct RobselDataset **out);

// # Safety
// `ds` must be null or a live handle from a `robsel_dataset_*` constructor.
size_t robsel_dataset_nrows(const struct RobselDataset *ds);

// # Safety
// `ds` must be null or a live handle from a `robsel_dataset_*` constructor.
size_t robsel_dataset_ncols(const struct RobselDataset *ds);

// # Safety
// `ds` must be null or a handle not yet freed.
void robsel_dataset_free(struct RobselDataset *ds);

// Fits at a fixed penalty level `f`.
//
// # Safety
// `ds` must be a live dataset handle and `out` a writable handle pointer.
enum RobselStatus robsel_fit(const struct RobselDataset *ds,
                             uint32_t condition,
                             uint32_t penalty,
                             double h,
                             double f,
                             struct RobselFit **out);

// Fits over the default penalty grid and keeps the HBIC minimizer.
//
// # Safety
// `ds` must be a live dataset handle and `out` a writable handle pointer.
enum RobselStatus robsel_select(const struct RobselDataset *ds,
                                uint32_t condition,
                                uint32_t penalty,
                                double h,
                                struct RobselFit **out);

// Number of coefficients in the fit.
//
// # Safety
// `fit` must be null or a live fit handle.
size_t robsel_fit_len(const struct RobselFit *fit);

// Copies the coefficients into `buf`, which holds `len` doubles.
//
// # Safety
// `fit` must be a live fit handle and `buf` must point to `len` writable
// doubles.
enum RobselStatus robsel_fit_coefficients(const struct RobselFit *fit, double *buf, size_t len);

// Penalty level of the fit; NaN for a null handle.
//
// # Safety
// `fit` must be null or a live fit handle.
double robsel_fit_penalty_level(const struct RobselFit *fit);

// # Safety
// `fit` must be null or a live fit handle.
double robsel_fit_hbic(const struct RobselFit *fit);

// Weighted data-fit term at the estimate.
//
// # Safety
// `fit` must be null or a live fit handle.
double robsel_fit_objective(const struct RobselFit *fit);

// # Safety
// `fit` must be null or a live fit handle.
size_t robsel_fit_active_count(const struct RobselFit *fit);

// # Safety
// `fit` must be null or a live fit handle.
bool robsel_fit_converged(const struct RobselFit *fit);

// # Safety
// `fit` must be null or a handle not yet freed.
void robsel_fit_free(struct RobselFit *fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROBSEL_H */
