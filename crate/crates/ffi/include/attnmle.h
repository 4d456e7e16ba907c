#ifndef ATTNMLE_H
#define ATTNMLE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AttnStatus {
  ATTN_STATUS_OK = 0,
  ATTN_STATUS_NULL_POINTER = 1,
  ATTN_STATUS_DIMENSION_MISMATCH = 2,
  ATTN_STATUS_EMPTY_SEQUENCE = 3,
  ATTN_STATUS_NON_FINITE_INPUT = 4,
  ATTN_STATUS_ZERO_VECTOR = 5,
  ATTN_STATUS_INDEX_OUT_OF_RANGE = 6,
  ATTN_STATUS_OVERFLOW = 7,
  ATTN_STATUS_INVALID_PARAMETER = 8,
  ATTN_STATUS_DID_NOT_CONVERGE = 9,
  ATTN_STATUS_BUFFER_TOO_SMALL = 10,
  ATTN_STATUS_PANIC = 11,
} AttnStatus;

// Gaussian attention model handle.
typedef struct AttnGaussianModel AttnGaussianModel;

// Maximum-entropy model handle.
typedef struct AttnMaxEntModel AttnMaxEntModel;

// Key/value sequence handle.
typedef struct AttnSequence AttnSequence;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until the
// next failing call on the same thread.
const char *attn_last_error_message(void);

// # Safety
// `x` and `y` must each point to `len` doubles; `out` to one double.
enum AttnStatus attn_inner_product(const double *x, const double *y, size_t len, double *out);

// # Safety
// `logits` must point to `len` doubles and `out` to `out_len` doubles.
enum AttnStatus attn_softmax(const double *logits, size_t len, double *out, size_t out_len);

// Builds a sequence from row-major `len x dim` key and value matrices.
//
// # Safety
// `keys` and `values` must each point to `len * dim` doubles; `out` must be
// a valid location for the new handle.
enum AttnStatus attn_sequence_new(const double *keys,
                                  const double *values,
                                  size_t len,
                                  size_t dim,
                                  struct AttnSequence **out);

// # Safety
// `seq` must be NULL or a handle from `attn_sequence_new` not yet freed.
void attn_sequence_free(struct AttnSequence *seq);

// Sequence length `T`, or 0 for NULL.
//
// # Safety
// `seq` must be NULL or a live handle.
size_t attn_sequence_len(const struct AttnSequence *seq);

// Vector dimension `d`, or 0 for NULL.
//
// # Safety
// `seq` must be NULL or a live handle.
size_t attn_sequence_dim(const struct AttnSequence *seq);

// Softmax weights `w_i(q)`; writes `T` values.
//
// # Safety
// `seq` must be a live handle, `query` must point to `dim` doubles and
// `out` to `out_len` doubles.
enum AttnStatus attn_attention_weights(const struct AttnSequence *seq,
                                       const double *query,
                                       size_t dim,
                                       double alpha,
                                       double *out,
                                       size_t out_len);

// Context vector `Σ_i w_i(q) v_i`; writes `d` values.
//
// # Safety
// As for `attn_attention_weights`.
enum AttnStatus attn_context_vector(const struct AttnSequence *seq,
                                    const double *query,
                                    size_t dim,
                                    double alpha,
                                    double *out,
                                    size_t out_len);

// Self-attention over `T` row-major queries; writes `T * d` values and the
// number of inner products evaluated (`T²`).
//
// # Safety
// `queries` must point to `num_queries * dim` doubles, `out` to `out_len`
// doubles and `inner_products` to one `uint64_t` (or be NULL).
enum AttnStatus attn_self_attention(const struct AttnSequence *seq,
                                    const double *queries,
                                    size_t num_queries,
                                    size_t dim,
                                    double alpha,
                                    double *out,
                                    size_t out_len,
                                    uint64_t *inner_products);

// # Safety
// `seq` must be a live handle (it is copied, not retained), `query` must
// point to `dim` doubles and `out` must be valid for writing.
enum AttnStatus attn_gaussian_new(double alpha,
                                  double beta,
                                  const double *query,
                                  size_t dim,
                                  const struct AttnSequence *seq,
                                  struct AttnGaussianModel **out);

// # Safety
// `model` must be NULL or a live handle from `attn_gaussian_new`.
void attn_gaussian_free(struct AttnGaussianModel *model);

// `θ(i, q) = exp(α qᵗk_i)`.
//
// # Safety
// `model` must be a live handle and `out` must point to one double.
enum AttnStatus attn_gaussian_precision(const struct AttnGaussianModel *model,
                                        size_t i,
                                        double *out);

// # Safety
// `model` must be a live handle and `out` must point to one double.
enum AttnStatus attn_gaussian_log_density(const struct AttnGaussianModel *model,
                                          size_t i,
                                          size_t coord,
                                          double v,
                                          double *out);

// # Safety
// `v` must point to `dim` doubles and `out` to one double.
enum AttnStatus attn_gaussian_log_likelihood(const struct AttnGaussianModel *model,
                                             const double *v,
                                             size_t dim,
                                             double *out);

// Gradient of the log-likelihood at `v`; writes `d` values.
//
// # Safety
// `v` must point to `dim` doubles and `out` to `out_len` doubles.
enum AttnStatus attn_gaussian_gradient(const struct AttnGaussianModel *model,
                                       const double *v,
                                       size_t dim,
                                       double *out,
                                       size_t out_len);

// Closed-form maximum-likelihood estimate; writes `d` values.
//
// # Safety
// `model` must be a live handle and `out` must point to `out_len` doubles.
enum AttnStatus attn_gaussian_closed_form(const struct AttnGaussianModel *model,
                                          double *out,
                                          size_t out_len);

// Gradient-ascent estimate from `init`; writes `d` values and, if
// `iterations` is non-NULL, the iteration count.
//
// # Safety
// `init` must point to `dim` doubles, `out` to `out_len` doubles.
enum AttnStatus attn_gaussian_numerical(const struct AttnGaussianModel *model,
                                        const double *init,
                                        size_t dim,
                                        double tol,
                                        size_t max_iters,
                                        double *out,
                                        size_t out_len,
                                        size_t *iterations);

// # Safety
// `lambdas` must point to `len` doubles, `query` to `dim` doubles; `seq`
// must be a live handle whose keys are used (copied).
enum AttnStatus attn_maxent_new(const double *lambdas,
                                size_t len,
                                const double *query,
                                size_t dim,
                                const struct AttnSequence *seq,
                                struct AttnMaxEntModel **out);

// # Safety
// `model` must be NULL or a live handle from `attn_maxent_new`.
void attn_maxent_free(struct AttnMaxEntModel *model);

// `p(y | q)` for every key index; writes `T` values.
//
// # Safety
// `model` must be a live handle and `out` must point to `out_len` doubles.
enum AttnStatus attn_maxent_probability(const struct AttnMaxEntModel *model,
                                        double *out,
                                        size_t out_len);

// `f_i(q, y)`.
//
// # Safety
// `model` must be a live handle and `out` must point to one double.
enum AttnStatus attn_maxent_feature(const struct AttnMaxEntModel *model,
                                    size_t i,
                                    size_t y,
                                    double *out);

// `E_p[f_i]`.
//
// # Safety
// `model` must be a live handle and `out` must point to one double.
enum AttnStatus attn_maxent_expected_feature(const struct AttnMaxEntModel *model,
                                             size_t i,
                                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ATTNMLE_H */
