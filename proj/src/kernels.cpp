#include "cdbnmf/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace cdbnmf::kernels {
namespace {

// Row- and block-level bodies shared by both backends, so the arithmetic
// (and therefore the rounding) is identical between them.

// Accumulation loops are unrolled four terms at a time. Terms are still added
// left to right into the accumulator, so the rounding matches a plain loop.

void rate_row(const RealMatrix& w, const RealMatrix& h, RealMatrix& out, std::size_t i) {
  const std::size_t n = out.cols();
  const std::size_t k_count = w.cols();
  const double* wi = w.row(i).data();
  double* __restrict o = out.row(i).data();
  std::fill(o, o + n, 0.0);
  std::size_t k = 0;
  for (; k + 4 <= k_count; k += 4) {
    const double w0 = wi[k], w1 = wi[k + 1], w2 = wi[k + 2], w3 = wi[k + 3];
    const double* __restrict h0 = h.row(k).data();
    const double* __restrict h1 = h.row(k + 1).data();
    const double* __restrict h2 = h.row(k + 2).data();
    const double* __restrict h3 = h.row(k + 3).data();
    for (std::size_t j = 0; j < n; ++j) {
      double acc = o[j];
      acc += w0 * h0[j];
      acc += w1 * h1[j];
      acc += w2 * h2[j];
      acc += w3 * h3[j];
      o[j] = acc;
    }
  }
  for (; k < k_count; ++k) {
    const double wik = wi[k];
    const double* hk = h.row(k).data();
    for (std::size_t j = 0; j < n; ++j) o[j] += wik * hk[j];
  }
}

void ratio_row(const RealMatrix& x, const RealMatrix* mask, const RealMatrix& rate, double eps,
               RealMatrix& out, std::size_t i) {
  auto xi = x.row(i);
  auto ri = rate.row(i);
  auto o = out.row(i);
  if (mask) {
    auto mi = mask->row(i);
    for (std::size_t j = 0; j < o.size(); ++j)
      o[j] = (mi[j] != 0.0 && xi[j] != 0.0) ? xi[j] / std::max(ri[j], eps) : 0.0;
  } else {
    for (std::size_t j = 0; j < o.size(); ++j)
      o[j] = xi[j] != 0.0 ? xi[j] / std::max(ri[j], eps) : 0.0;
  }
}

// Columns [j0, j1) of W^T R, accumulated over rows i in ascending order.
void left_gram_block(const RealMatrix& w, const RealMatrix& r, RealMatrix& out, std::size_t j0,
                     std::size_t j1) {
  const std::size_t k_count = w.cols();
  const std::size_t rows = w.rows();
  for (std::size_t k = 0; k < k_count; ++k) std::fill(&out(k, j0), &out(k, 0) + j1, 0.0);
  std::size_t i = 0;
  for (; i + 4 <= rows; i += 4) {
    const double* __restrict r0 = r.row(i).data();
    const double* __restrict r1 = r.row(i + 1).data();
    const double* __restrict r2 = r.row(i + 2).data();
    const double* __restrict r3 = r.row(i + 3).data();
    for (std::size_t k = 0; k < k_count; ++k) {
      const double w0 = w(i, k), w1 = w(i + 1, k), w2 = w(i + 2, k), w3 = w(i + 3, k);
      double* __restrict ok = out.row(k).data();
      for (std::size_t j = j0; j < j1; ++j) {
        double acc = ok[j];
        acc += w0 * r0[j];
        acc += w1 * r1[j];
        acc += w2 * r2[j];
        acc += w3 * r3[j];
        ok[j] = acc;
      }
    }
  }
  for (; i < rows; ++i) {
    const double* ri = r.row(i).data();
    for (std::size_t k = 0; k < k_count; ++k) {
      const double wik = w(i, k);
      double* ok = out.row(k).data();
      for (std::size_t j = j0; j < j1; ++j) ok[j] += wik * ri[j];
    }
  }
}

void right_gram_row(const RealMatrix& r, const RealMatrix& ht, RealMatrix& out, std::size_t i) {
  const std::size_t k_count = out.cols();
  double* __restrict o = out.row(i).data();
  std::fill(o, o + k_count, 0.0);
  const double* ri = r.row(i).data();
  const std::size_t n = r.cols();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const double r0 = ri[j], r1 = ri[j + 1], r2 = ri[j + 2], r3 = ri[j + 3];
    const double* __restrict h0 = ht.row(j).data();
    const double* __restrict h1 = ht.row(j + 1).data();
    const double* __restrict h2 = ht.row(j + 2).data();
    const double* __restrict h3 = ht.row(j + 3).data();
    for (std::size_t k = 0; k < k_count; ++k) {
      double acc = o[k];
      acc += r0 * h0[k];
      acc += r1 * h1[k];
      acc += r2 * h2[k];
      acc += r3 * h3[k];
      o[k] = acc;
    }
  }
  for (; j < n; ++j) {
    const double rij = ri[j];
    const double* hj = ht.row(j).data();
    for (std::size_t k = 0; k < k_count; ++k) o[k] += rij * hj[k];
  }
}

double nll_row(const RealMatrix& x, const RealMatrix* mask, const RealMatrix& rate,
               const RealMatrix& log_factorial, double eps, std::size_t i) {
  auto xi = x.row(i);
  auto ri = rate.row(i);
  auto li = log_factorial.row(i);
  double acc = 0.0;
  for (std::size_t j = 0; j < xi.size(); ++j) {
    if (mask && (*mask)(i, j) == 0.0) continue;
    const double lam = std::max(ri[j], eps);
    acc += lam;
    if (xi[j] != 0.0) acc += li[j] - xi[j] * std::log(lam);
  }
  return acc;
}

// Same sum as nll_row; also writes the ratio row that ratio_row would.
double nll_ratio_row(const RealMatrix& x, const RealMatrix* mask, const RealMatrix& rate,
                     const RealMatrix& log_factorial, double eps, RealMatrix& out,
                     std::size_t i) {
  auto xi = x.row(i);
  auto ri = rate.row(i);
  auto li = log_factorial.row(i);
  auto o = out.row(i);
  double acc = 0.0;
  for (std::size_t j = 0; j < xi.size(); ++j) {
    if (mask && (*mask)(i, j) == 0.0) {
      o[j] = 0.0;
      continue;
    }
    const double lam = std::max(ri[j], eps);
    acc += lam;
    if (xi[j] != 0.0) {
      acc += li[j] - xi[j] * std::log(lam);
      o[j] = xi[j] / lam;
    } else {
      o[j] = 0.0;
    }
  }
  return acc;
}

constexpr std::size_t kColumnBlock = 256;

// Only fork threads when there is enough work to amortize it.
bool worth_forking(std::size_t work) { return work > (1u << 15); }

}  // namespace

namespace serial {

void rate(const RealMatrix& w, const RealMatrix& h, RealMatrix& out) {
  out.reshape_for_overwrite(w.rows(), h.cols());
  for (std::size_t i = 0; i < w.rows(); ++i) rate_row(w, h, out, i);
}

void ratio(const RealMatrix& x, const RealMatrix* mask, const RealMatrix& rate, double eps,
           RealMatrix& out) {
  out.reshape_for_overwrite(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) ratio_row(x, mask, rate, eps, out, i);
}

void left_gram(const RealMatrix& w, const RealMatrix& r, RealMatrix& out) {
  out.reshape_for_overwrite(w.cols(), r.cols());
  left_gram_block(w, r, out, 0, r.cols());
}

void right_gram(const RealMatrix& r, const RealMatrix& ht, RealMatrix& out) {
  out.reshape_for_overwrite(r.rows(), ht.cols());
  for (std::size_t i = 0; i < r.rows(); ++i) right_gram_row(r, ht, out, i);
}

double poisson_nll(const RealMatrix& x, const RealMatrix* mask, const RealMatrix& rate,
                   const RealMatrix& log_factorial, double eps) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) total += nll_row(x, mask, rate, log_factorial, eps, i);
  return total;
}

void rate_ratio(const RealMatrix& w, const RealMatrix& h, const RealMatrix& x,
                const RealMatrix* mask, double eps, RealMatrix& rate_out, RealMatrix& ratio_out) {
  rate_out.reshape_for_overwrite(w.rows(), h.cols());
  ratio_out.reshape_for_overwrite(x.rows(), x.cols());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    rate_row(w, h, rate_out, i);
    ratio_row(x, mask, rate_out, eps, ratio_out, i);
  }
}

double poisson_nll_ratio(const RealMatrix& x, const RealMatrix* mask, const RealMatrix& rate,
                         const RealMatrix& log_factorial, double eps, RealMatrix& ratio_out) {
  ratio_out.reshape_for_overwrite(x.rows(), x.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    total += nll_ratio_row(x, mask, rate, log_factorial, eps, ratio_out, i);
  return total;
}

}  // namespace serial

namespace parallel {

void rate(const RealMatrix& w, const RealMatrix& h, RealMatrix& out) {
  out.reshape_for_overwrite(w.rows(), h.cols());
  const auto n = static_cast<std::ptrdiff_t>(w.rows());
#pragma omp parallel for schedule(static) if (worth_forking(w.size() * h.cols()))
  for (std::ptrdiff_t i = 0; i < n; ++i) rate_row(w, h, out, static_cast<std::size_t>(i));
}

void ratio(const RealMatrix& x, const RealMatrix* mask, const RealMatrix& rate, double eps,
           RealMatrix& out) {
  out.reshape_for_overwrite(x.rows(), x.cols());
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static) if (worth_forking(x.size()))
  for (std::ptrdiff_t i = 0; i < n; ++i)
    ratio_row(x, mask, rate, eps, out, static_cast<std::size_t>(i));
}

void left_gram(const RealMatrix& w, const RealMatrix& r, RealMatrix& out) {
  out.reshape_for_overwrite(w.cols(), r.cols());
  const std::size_t cols = r.cols();
  const auto blocks = static_cast<std::ptrdiff_t>((cols + kColumnBlock - 1) / kColumnBlock);
#pragma omp parallel for schedule(static) if (worth_forking(w.size() * cols))
  for (std::ptrdiff_t b = 0; b < blocks; ++b) {
    const std::size_t j0 = static_cast<std::size_t>(b) * kColumnBlock;
    left_gram_block(w, r, out, j0, std::min(cols, j0 + kColumnBlock));
  }
}

void right_gram(const RealMatrix& r, const RealMatrix& ht, RealMatrix& out) {
  out.reshape_for_overwrite(r.rows(), ht.cols());
  const auto n = static_cast<std::ptrdiff_t>(r.rows());
#pragma omp parallel for schedule(static) if (worth_forking(r.size() * ht.cols()))
  for (std::ptrdiff_t i = 0; i < n; ++i) right_gram_row(r, ht, out, static_cast<std::size_t>(i));
}

double poisson_nll(const RealMatrix& x, const RealMatrix* mask, const RealMatrix& rate,
                   const RealMatrix& log_factorial, double eps) {
  std::vector<double> partial(x.rows(), 0.0);
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static) if (worth_forking(x.size()))
  for (std::ptrdiff_t i = 0; i < n; ++i)
    partial[static_cast<std::size_t>(i)] =
        nll_row(x, mask, rate, log_factorial, eps, static_cast<std::size_t>(i));
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

void rate_ratio(const RealMatrix& w, const RealMatrix& h, const RealMatrix& x,
                const RealMatrix* mask, double eps, RealMatrix& rate_out, RealMatrix& ratio_out) {
  rate_out.reshape_for_overwrite(w.rows(), h.cols());
  ratio_out.reshape_for_overwrite(x.rows(), x.cols());
  const auto n = static_cast<std::ptrdiff_t>(w.rows());
#pragma omp parallel for schedule(static) if (worth_forking(w.size() * h.cols()))
  for (std::ptrdiff_t si = 0; si < n; ++si) {
    const auto i = static_cast<std::size_t>(si);
    rate_row(w, h, rate_out, i);
    ratio_row(x, mask, rate_out, eps, ratio_out, i);
  }
}

double poisson_nll_ratio(const RealMatrix& x, const RealMatrix* mask, const RealMatrix& rate,
                         const RealMatrix& log_factorial, double eps, RealMatrix& ratio_out) {
  ratio_out.reshape_for_overwrite(x.rows(), x.cols());
  std::vector<double> partial(x.rows(), 0.0);
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static) if (worth_forking(x.size()))
  for (std::ptrdiff_t i = 0; i < n; ++i)
    partial[static_cast<std::size_t>(i)] = nll_ratio_row(x, mask, rate, log_factorial, eps,
                                                         ratio_out, static_cast<std::size_t>(i));
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace parallel

std::vector<double> column_sums(const RealMatrix& w) {
  std::vector<double> out(w.cols(), 0.0);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    auto wi = w.row(i);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += wi[k];
  }
  return out;
}

std::vector<double> row_sums(const RealMatrix& h) {
  std::vector<double> out(h.rows(), 0.0);
  for (std::size_t k = 0; k < h.rows(); ++k) {
    double acc = 0.0;
    for (double v : h.row(k)) acc += v;
    out[k] = acc;
  }
  return out;
}

const KernelSet& kernel_set(Backend backend) {
  static const KernelSet serial_set{serial::rate,        serial::ratio,
                                    serial::left_gram,   serial::right_gram,
                                    serial::poisson_nll, serial::rate_ratio,
                                    serial::poisson_nll_ratio};
  static const KernelSet parallel_set{parallel::rate,        parallel::ratio,
                                      parallel::left_gram,   parallel::right_gram,
                                      parallel::poisson_nll, parallel::rate_ratio,
                                      parallel::poisson_nll_ratio};
  return backend == Backend::serial ? serial_set : parallel_set;
}

}  // namespace cdbnmf::kernels
