#ifndef TRAPEZOID_SPECTRA_H
#define TRAPEZOID_SPECTRA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum TsStatus {
  TS_STATUS_OK = 0,
  TS_STATUS_NULL_POINTER = 1,
  // Invalid parameters or a violated precondition.
  TS_STATUS_INVALID_ARGUMENT = 2,
  // Eigenvalue computation failed.
  TS_STATUS_EIGEN = 3,
  // Heat or wave trace analysis failed.
  TS_STATUS_TRACE = 4,
  // Reconstruction failed.
  TS_STATUS_RECONSTRUCT = 5,
  // Caller buffer too small; the required length was written.
  TS_STATUS_BUFFER_TOO_SMALL = 6,
  // A Rust panic was caught at the boundary.
  TS_STATUS_PANIC = 7,
} TsStatus;

typedef enum TsAmplitudeKind {
  // Rectangle: no top-edge amplitude.
  TS_AMPLITUDE_KIND_NONE = 0,
  // `C_{alpha,beta}`.
  TS_AMPLITUDE_KIND_ALPHA_BETA = 1,
  // `C_beta` with a right angle at `alpha`.
  TS_AMPLITUDE_KIND_BETA_RIGHT_ANGLE = 2,
} TsAmplitudeKind;

typedef enum TsBoundary {
  TS_BOUNDARY_DIRICHLET = 0,
  TS_BOUNDARY_NEUMANN = 1,
} TsBoundary;

// Opaque eigenvalue list.
typedef struct TsSpectrum TsSpectrum;

// Opaque trapezoid.
typedef struct TsTrapezoid TsTrapezoid;

// Trapezoid parameters; `base` is the bottom length.
typedef struct TsParams {
  double b;
  double h;
  double alpha;
  double beta;
  double base;
} TsParams;

// Closed-form invariants.
typedef struct TsInvariants {
  double area;
  double perimeter;
  double q;
  double height;
  double top;
  double amplitude;
  enum TsAmplitudeKind amplitude_kind;
} TsInvariants;

// Heat-trace fit result.
typedef struct TsHeatFit {
  double area;
  double perimeter;
  double corner_sum;
  double residual;
} TsHeatFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *ts_last_error(void);

// Library version as a static NUL-terminated string.
const char *ts_version(void);

// Validates `(b, h, alpha, beta)` (radians, `beta <= alpha`).
//
// # Safety
// `out` must be null or valid for a pointer write.
enum TsStatus ts_trapezoid_new(double b,
                               double h,
                               double alpha,
                               double beta,
                               struct TsTrapezoid **out);

// # Safety
// `t` must be null or a handle from this library not yet freed.
void ts_trapezoid_free(struct TsTrapezoid *t);

// # Safety
// `t` must be a live handle; `out` valid for a write.
enum TsStatus ts_trapezoid_params(const struct TsTrapezoid *t, struct TsParams *out);

// # Safety
// `t` must be a live handle; `out` valid for a write.
enum TsStatus ts_trapezoid_invariants(const struct TsTrapezoid *t, struct TsInvariants *out);

// FEM eigenvalues on an `n x n` mesh: the `count` smallest when `count > 0`,
// else all below `lambda_max`. With `richardson != 0` the list is
// extrapolated from meshes `n` and `2n`.
//
// # Safety
// `t` must be a live handle; `out` valid for a write.
enum TsStatus ts_spectrum_compute(const struct TsTrapezoid *t,
                                  size_t n,
                                  enum TsBoundary bc,
                                  size_t count,
                                  double lambda_max,
                                  int32_t richardson,
                                  struct TsSpectrum **out);

// Exact spectrum of the `width x height` rectangle below `lambda_max`.
//
// # Safety
// `out` must be valid for a write.
enum TsStatus ts_spectrum_rectangle(double width,
                                    double height,
                                    enum TsBoundary bc,
                                    double lambda_max,
                                    struct TsSpectrum **out);

// Wraps `len` ascending eigenvalues; the list counts as trusted and
// complete up to its last value.
//
// # Safety
// `values` must be valid for `len` reads; `out` valid for a write.
enum TsStatus ts_spectrum_from_values(enum TsBoundary bc,
                                      const double *values,
                                      size_t len,
                                      struct TsSpectrum **out);

// # Safety
// `s` must be null or a handle from this library not yet freed.
void ts_spectrum_free(struct TsSpectrum *s);

// Number of eigenvalues, 0 for a null handle.
//
// # Safety
// `s` must be null or a live handle.
size_t ts_spectrum_len(const struct TsSpectrum *s);

// Largest trusted eigenvalue, NaN for a null handle.
//
// # Safety
// `s` must be null or a live handle.
double ts_spectrum_lambda_max_trust(const struct TsSpectrum *s);

// Copies the eigenvalues into `buf`. `*written` receives the list length;
// when `cap` is smaller nothing is copied and `BufferTooSmall` is returned.
//
// # Safety
// `buf` must be valid for `cap` writes; `written` valid for a write.
enum TsStatus ts_spectrum_copy(const struct TsSpectrum *s,
                               double *buf,
                               size_t cap,
                               size_t *written);

// Fits `A/(4 pi t) +- L/(8 sqrt(pi t)) + c` to the heat trace on
// `points` geometric times in `[t_min, t_max]`.
//
// # Safety
// `s` must be a live handle; `out` valid for a write.
enum TsStatus ts_heat_fit(const struct TsSpectrum *s,
                          double t_min,
                          double t_max,
                          size_t points,
                          struct TsHeatFit *out);

// Recovers the trapezoid from a Neumann spectrum with default options.
//
// # Safety
// `s` must be a live handle; `out` valid for a write.
enum TsStatus ts_reconstruct(const struct TsSpectrum *s, struct TsParams *out);

// Trapezoid from area, perimeter, height and top length.
//
// # Safety
// `out` must be valid for a write.
enum TsStatus ts_reconstruct_alhb(double a, double l, double h, double b, struct TsParams *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRAPEZOID_SPECTRA_H */
