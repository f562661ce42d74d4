#ifndef QNL_CHAIN_H
#define QNL_CHAIN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result codes.
typedef enum QnlStatus {
  QNL_STATUS_OK = 0,
  QNL_STATUS_NULL_POINTER = 1,
  QNL_STATUS_INVALID_ARGUMENT = 2,
  QNL_STATUS_INADMISSIBLE = 3,
  QNL_STATUS_SOLVER_FAILED = 4,
  QNL_STATUS_NOT_EQUILIBRIUM = 5,
  QNL_STATUS_BUFFER_TOO_SMALL = 6,
  QNL_STATUS_INTERNAL = 7,
  QNL_STATUS_PANIC = 8,
} QnlStatus;

// Which energy to evaluate.
typedef enum QnlModel {
  QNL_MODEL_ATOMISTIC = 0,
  // Quasinonlocal coupling; needs a partition.
  QNL_MODEL_QNL = 1,
  // Local continuum limit (empty atomistic region).
  QNL_MODEL_CAUCHY_BORN = 2,
} QnlModel;

typedef enum QnlCertificateKind {
  // Built at an atomistic equilibrium; bounds the coupled solution.
  QNL_CERTIFICATE_KIND_A_PRIORI = 0,
  // Built at a coupled equilibrium; bounds the atomistic solution.
  QNL_CERTIFICATE_KIND_A_POSTERIORI = 1,
} QnlCertificateKind;

typedef struct QnlCertificate QnlCertificate;

typedef struct QnlDeformation QnlDeformation;

typedef struct QnlPartition QnlPartition;

typedef struct QnlPotential QnlPotential;

// Scalar summary of a certificate.
typedef struct QnlCertificateSummary {
  bool certified;
  double eta;
  double sigma;
  double lipschitz;
  double contraction;
  double radius;
  double error_bound;
} QnlCertificateSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread, or null. Valid until the
// next failing call on this thread.
const char *qnl_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *qnl_version(void);

// Lennard-Jones `r^-12 - 2 r^-6`.
//
// # Safety
// `out` must be valid for writes.
enum QnlStatus qnl_potential_lennard_jones(struct QnlPotential **out);

// Morse potential with stiffness `alpha`.
//
// # Safety
// `out` must be valid for writes.
enum QnlStatus qnl_potential_morse(double alpha, struct QnlPotential **out);

// Lennard-Jones truncated smoothly at `r_cut`.
//
// # Safety
// `out` must be valid for writes.
enum QnlStatus qnl_potential_lennard_jones_cutoff(double r_cut, struct QnlPotential **out);

// # Safety
// `pot` must come from a `qnl_potential_*` constructor or be null.
void qnl_potential_free(struct QnlPotential *pot);

// Partition whose atomistic region is the 1-based atoms `atoms[0..len]`.
//
// # Safety
// `atoms` must point to `len` values (may be null when `len == 0`); `out`
// must be valid for writes.
enum QnlStatus qnl_partition_new(size_t n,
                                 const size_t *atoms,
                                 size_t len,
                                 struct QnlPartition **out);

// Partition with atomistic atoms `start..=end` (1-based, wrapping).
//
// # Safety
// `out` must be valid for writes.
enum QnlStatus qnl_partition_interval(size_t n,
                                      size_t start,
                                      size_t end,
                                      struct QnlPartition **out);

// # Safety
// `part` must come from a `qnl_partition_*` constructor or be null.
void qnl_partition_free(struct QnlPartition *part);

// Uniform deformation `y = F x` with `n` atoms per period.
//
// # Safety
// `out` must be valid for writes.
enum QnlStatus qnl_deformation_uniform(size_t n, double f, struct QnlDeformation **out);

// Deformation with bond strains `strains[0..n]`; `F` is their mean.
//
// # Safety
// `strains` must point to `n` values; `out` must be valid for writes.
enum QnlStatus qnl_deformation_from_strains(const double *strains,
                                            size_t n,
                                            struct QnlDeformation **out);

// Number of atoms per period, or 0 for a null handle.
//
// # Safety
// `y` must be a live deformation handle or null.
size_t qnl_deformation_len(const struct QnlDeformation *y);

// Copies the `n` bond strains into `buf` (`buf_len >= n`).
//
// # Safety
// `y` must be a live handle and `buf` valid for `buf_len` writes.
enum QnlStatus qnl_deformation_strains(const struct QnlDeformation *y, double *buf, size_t buf_len);

// # Safety
// `y` must come from a `qnl_deformation_*` constructor or solver, or be null.
void qnl_deformation_free(struct QnlDeformation *y);

// Stored energy of `y` for the chosen model. `part` is required only for
// `QnlModel::Qnl`.
//
// # Safety
// Handles must be live (or null where optional); `out` valid for writes.
enum QnlStatus qnl_energy(enum QnlModel kind,
                          const struct QnlPotential *pot,
                          const struct QnlPartition *part,
                          const struct QnlDeformation *y,
                          double *out);

// Stability constant: the smallest eigenvalue of the Hessian on mean-zero
// displacements, measured against the discrete H^1 seminorm.
//
// # Safety
// Handles must be live (or null where optional); `out` valid for writes.
enum QnlStatus qnl_stability_constant(enum QnlModel kind,
                                      const struct QnlPotential *pot,
                                      const struct QnlPartition *part,
                                      const struct QnlDeformation *y,
                                      double *out);

// Newton solve for the equilibrium under the mean-zero atom load
// `load[0..n]`, starting from `y0`. Pass `tol <= 0` or `max_iter == 0` for
// the defaults. On success `*out` receives a new deformation handle.
//
// # Safety
// Handles must be live (or null where optional); `load` must point to `n`
// values where `n` is the chain length; output pointers valid for writes
// (`iterations` may be null).
enum QnlStatus qnl_newton_solve(enum QnlModel kind,
                                const struct QnlPotential *pot,
                                const struct QnlPartition *part,
                                const struct QnlDeformation *y0,
                                const double *load,
                                double tol,
                                size_t max_iter,
                                struct QnlDeformation **out,
                                size_t *iterations);

// Consistency error `||DPhi(y) - DPhi_qc(y)||` in the dual `p`-norm and its
// computable upper bound. `p` may be `INFINITY`.
//
// # Safety
// Handles must be live; output pointers valid for writes.
enum QnlStatus qnl_consistency(const struct QnlPotential *pot,
                               const struct QnlPartition *part,
                               const struct QnlDeformation *y,
                               double p,
                               double *measured,
                               double *bound);

// Builds an existence and error certificate at the equilibrium `y` under the
// load `load[0..n]`. A refused certificate is a successful call; inspect it
// with [`qnl_certificate_summary`]. `delta` in (0, 1); pass 0 for the default.
//
// # Safety
// Handles must be live; `load` must point to `n` values; `out` valid for
// writes.
enum QnlStatus qnl_certify(enum QnlCertificateKind kind,
                           const struct QnlPotential *pot,
                           const struct QnlPartition *part,
                           const struct QnlDeformation *y,
                           const double *load,
                           double delta,
                           struct QnlCertificate **out);

// # Safety
// `cert` must be live; `out` valid for writes.
enum QnlStatus qnl_certificate_summary(const struct QnlCertificate *cert,
                                       struct QnlCertificateSummary *out);

// Full certificate as a JSON string; release with [`qnl_string_free`].
//
// # Safety
// `cert` must be live; `out` valid for writes.
enum QnlStatus qnl_certificate_json(const struct QnlCertificate *cert, char **out);

// # Safety
// `cert` must come from [`qnl_certify`] or be null.
void qnl_certificate_free(struct QnlCertificate *cert);

// # Safety
// `s` must come from this library or be null.
void qnl_string_free(char *s);

// Copies the last error message; convenience for bindings that cannot hold
// borrowed pointers. Returns the message length, writing at most
// `buf_len - 1` bytes plus a NUL.
//
// # Safety
// `buf` must be valid for `buf_len` writes or null.
size_t qnl_last_error_copy(char *buf, size_t buf_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QNL_CHAIN_H */
