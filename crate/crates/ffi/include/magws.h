#ifndef MAGWS_H
#define MAGWS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Status codes returned by every fallible function.
typedef enum MagwsStatus {
  // Success.
  MAGWS_STATUS_OK = 0,
  // A required pointer argument was null.
  MAGWS_STATUS_NULL_POINTER = 1,
  // A scalar argument is outside its domain.
  MAGWS_STATUS_INVALID_PARAMETER = 2,
  // An index is out of range.
  MAGWS_STATUS_INDEX_OUT_OF_RANGE = 3,
  // Operands carry different magnetic lengths.
  MAGWS_STATUS_MISMATCHED_PARAMS = 4,
  // A numerical routine failed or a truncation was too small.
  MAGWS_STATUS_NUMERICAL = 5,
  // A string argument was not valid UTF-8.
  MAGWS_STATUS_INVALID_UTF8 = 6,
  // A Rust panic was caught at the boundary.
  MAGWS_STATUS_PANIC = 7,
} MagwsStatus;

// Opaque handle to an element of the magnetic algebra.
typedef struct MagwsElement MagwsElement;

// Result of [`magws_connes_formula`].
typedef struct MagwsConnesResult {
  // Real part of the Dixmier estimate of `d(rho A_1)^* d(rho A_2)`.
  double lhs_re;
  // Imaginary part of the same estimate.
  double lhs_im;
  // Real part of `(2 / l^2) trace(nabla(A_1)^* . nabla(A_2))`.
  double rhs_re;
  // Imaginary part of the same value.
  double rhs_im;
  // Modulus of the chirality-weighted estimate.
  double chi_abs;
  // Combined fit residual.
  double residual;
} MagwsConnesResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or an empty string. The
// pointer stays valid until the next failing call on the same thread.
const char *magws_last_error(void);

// Library version as a static nul-terminated string.
const char *magws_version(void);

// Creates the transition operator `Upsilon_{j->k}` truncated at `cutoff`.
//
// # Safety
// `out` must be valid for one pointer write.
enum MagwsStatus magws_element_upsilon(uintptr_t j,
                                       uintptr_t k,
                                       uintptr_t cutoff,
                                       double ell_b,
                                       struct MagwsElement **out);

// Creates the Landau projection `Pi_n` truncated at `cutoff`.
//
// # Safety
// `out` must be valid for one pointer write.
enum MagwsStatus magws_element_landau_projection(uintptr_t n,
                                                 uintptr_t cutoff,
                                                 double ell_b,
                                                 struct MagwsElement **out);

// Creates the heat element `exp(-s H / E_B)` truncated at `cutoff`.
//
// # Safety
// `out` must be valid for one pointer write.
enum MagwsStatus magws_element_heat(double s,
                                    uintptr_t cutoff,
                                    double ell_b,
                                    struct MagwsElement **out);

// Releases a handle. Null is accepted and ignored.
//
// # Safety
// `handle` must be null or a handle from this library not yet freed.
void magws_element_free(struct MagwsElement *handle);

// `out = a b`.
//
// # Safety
// `a` and `b` must be live handles; `out` must be valid for one pointer write.
enum MagwsStatus magws_element_multiply(const struct MagwsElement *a,
                                        const struct MagwsElement *b,
                                        struct MagwsElement **out);

// `out = alpha a + beta b` with complex coefficients.
//
// # Safety
// `a` and `b` must be live handles; `out` must be valid for one pointer write.
enum MagwsStatus magws_element_combine(double alpha_re,
                                       double alpha_im,
                                       const struct MagwsElement *a,
                                       double beta_re,
                                       double beta_im,
                                       const struct MagwsElement *b,
                                       struct MagwsElement **out);

// `out = a^*`.
//
// # Safety
// `a` must be a live handle; `out` must be valid for one pointer write.
enum MagwsStatus magws_element_adjoint(const struct MagwsElement *a, struct MagwsElement **out);

// `out = nabla_dir(a)` for `dir` 1 or 2.
//
// # Safety
// `a` must be a live handle; `out` must be valid for one pointer write.
enum MagwsStatus magws_element_nabla(const struct MagwsElement *a,
                                     uint32_t dir,
                                     struct MagwsElement **out);

// Cutoff of the element.
//
// # Safety
// `a` must be a live handle; `out` must be valid for one write.
enum MagwsStatus magws_element_cutoff(const struct MagwsElement *a, uintptr_t *out);

// Coefficient of `Upsilon_{j->k}` in `a`; zero outside the cutoff.
//
// # Safety
// `a` must be a live handle; `re` and `im` must be valid for one write each.
enum MagwsStatus magws_element_get(const struct MagwsElement *a,
                                   uintptr_t k,
                                   uintptr_t j,
                                   double *re,
                                   double *im);

// Trace `sum_j a_{j,j}` of the element.
//
// # Safety
// `a` must be a live handle; `re` and `im` must be valid for one write each.
enum MagwsStatus magws_element_trace(const struct MagwsElement *a, double *re, double *im);

// Value of the Laguerre function `psi_{n,m}` at `(x1, x2)`.
//
// # Safety
// `re` and `im` must be valid for one write each.
enum MagwsStatus magws_laguerre_fn(uintptr_t n,
                                   uintptr_t m,
                                   double x1,
                                   double x2,
                                   double ell_b,
                                   double *re,
                                   double *im);

// Extrapolated Dixmier trace of an analytic case (`q2`, `d4`, `qpi0`,
// `qups1_1`, ...) at regularisation `eps` and depth `n_max`.
//
// # Safety
// `case_name` must be a nul-terminated string; `value` and `residual` must
// be valid for one write each.
enum MagwsStatus magws_dixmier_analytic(const char *case_name,
                                        double eps,
                                        uint64_t n_max,
                                        double *value,
                                        double *residual);

// First Connes formula for `(a1, a2)` with the default matrix-path settings,
// regularisation `eps` and dual cutoff `dual_cutoff`.
//
// # Safety
// `a1` and `a2` must be live handles; `out` must be valid for one write.
enum MagwsStatus magws_connes_formula(const struct MagwsElement *a1,
                                      const struct MagwsElement *a2,
                                      double eps,
                                      uintptr_t dual_cutoff,
                                      struct MagwsConnesResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAGWS_H */
