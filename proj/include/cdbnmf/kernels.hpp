#pragma once

#include <span>
#include <vector>

#include "cdbnmf/matrix.hpp"

// Dense kernels behind the multiplicative updates. Two implementations with
// identical signatures:
//
//   serial::    straightforward loops, the reference used by tests;
//   parallel::  OpenMP over independent output rows/column blocks.
//
// Every output element is accumulated by one thread in the same order as the
// serial loop, so the two agree bit-for-bit regardless of thread count. Row
// reductions (the likelihood) are summed per row and then combined in row order.
//
// `mask` arguments are optional (nullptr = all observed). Entries with mask 0
// are skipped entirely, never multiplied, so an all-ones mask reproduces the
// unmasked result exactly.
namespace cdbnmf::kernels {

enum class Backend { serial, parallel };

#define CDBNMF_KERNEL_DECLS                                                                     \
  /* out = W H  (N x K times K x N) */                                                           \
  void rate(const RealMatrix& w, const RealMatrix& h, RealMatrix& out);                          \
  /* out = M o X / max(rate, eps) */                                                             \
  void ratio(const RealMatrix& x, const RealMatrix* mask, const RealMatrix& rate, double eps,    \
             RealMatrix& out);                                                                   \
  /* out = W^T R  (K x N) */                                                                     \
  void left_gram(const RealMatrix& w, const RealMatrix& r, RealMatrix& out);                     \
  /* out = R H^T given ht = H^T  (N x K) */                                                      \
  void right_gram(const RealMatrix& r, const RealMatrix& ht, RealMatrix& out);                   \
  /* sum over observed (i,j) of  max(rate,eps) - x log max(rate,eps) + log x! */                 \
  double poisson_nll(const RealMatrix& x, const RealMatrix* mask, const RealMatrix& rate,        \
                     const RealMatrix& log_factorial, double eps);                               \
  /* Fused: rate_out = W H and ratio_out = M o X / max(rate, eps) in one pass */                 \
  void rate_ratio(const RealMatrix& w, const RealMatrix& h, const RealMatrix& x,                 \
                  const RealMatrix* mask, double eps, RealMatrix& rate_out,                      \
                  RealMatrix& ratio_out);                                                        \
  /* Fused: poisson_nll plus ratio_out = M o X / max(rate, eps) */                               \
  double poisson_nll_ratio(const RealMatrix& x, const RealMatrix* mask, const RealMatrix& rate,  \
                           const RealMatrix& log_factorial, double eps, RealMatrix& ratio_out);

namespace serial {
CDBNMF_KERNEL_DECLS
}  // namespace serial

namespace parallel {
CDBNMF_KERNEL_DECLS
}  // namespace parallel

#undef CDBNMF_KERNEL_DECLS

// Column sums of W (W^T 1), accumulated over rows in order.
std::vector<double> column_sums(const RealMatrix& w);
// Row sums of H (H 1), accumulated over columns in order.
std::vector<double> row_sums(const RealMatrix& h);

// Backend-dispatching table so callers pick an implementation once.
struct KernelSet {
  void (*rate)(const RealMatrix&, const RealMatrix&, RealMatrix&);
  void (*ratio)(const RealMatrix&, const RealMatrix*, const RealMatrix&, double, RealMatrix&);
  void (*left_gram)(const RealMatrix&, const RealMatrix&, RealMatrix&);
  void (*right_gram)(const RealMatrix&, const RealMatrix&, RealMatrix&);
  double (*poisson_nll)(const RealMatrix&, const RealMatrix*, const RealMatrix&,
                        const RealMatrix&, double);
  void (*rate_ratio)(const RealMatrix&, const RealMatrix&, const RealMatrix&, const RealMatrix*,
                     double, RealMatrix&, RealMatrix&);
  double (*poisson_nll_ratio)(const RealMatrix&, const RealMatrix*, const RealMatrix&,
                              const RealMatrix&, double, RealMatrix&);
};

const KernelSet& kernel_set(Backend backend);

}  // namespace cdbnmf::kernels
