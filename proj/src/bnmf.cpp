#include "cdbnmf/bnmf.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "cdbnmf/error.hpp"
#include "cdbnmf/random.hpp"

namespace cdbnmf {
namespace {

// Real-valued view of the data shared by every sweep of one fit.
struct Problem {
  RealMatrix x;
  RealMatrix log_fact;
  std::optional<RealMatrix> mask;

  const RealMatrix* mask_ptr() const { return mask ? &*mask : nullptr; }
};

Problem make_problem(const SimilarityMatrix& x, const BinaryMatrix* mask) {
  const std::size_t n = x.n();
  Problem p{RealMatrix(n, n), RealMatrix(n, n), std::nullopt};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      p.x(i, j) = static_cast<double>(x(i, j));
      p.log_fact(i, j) = log_factorial(x(i, j));
    }
  }
  if (mask) {
    if (mask->rows() != n || mask->cols() != n)
      throw ContractViolation("mask shape does not match the data");
    p.mask.emplace(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      bool observed = false;
      for (std::size_t j = 0; j < n; ++j) {
        (*p.mask)(i, j) = (*mask)(i, j) ? 1.0 : 0.0;
        observed = observed || (*mask)(i, j);
      }
      if (!observed)
        throw ContractViolation("row " + std::to_string(i) + " has no observed entries");
    }
  }
  return p;
}

struct Workspace {
  RealMatrix rate;
  RealMatrix ratio;
  RealMatrix numer;
  RealMatrix denom;
  RealMatrix ht;
};

void check_shapes(std::size_t n, const FactorModel& m) {
  if (m.w.rows() != n || m.h.cols() != n || m.w.cols() != m.k() || m.h.rows() != m.k())
    throw ContractViolation("factor shapes do not match the data");
}

// Assumes ws.ratio holds M o X / (W H) for the current factors.
void sweep_h(const kernels::KernelSet& ks, const Problem& p, FactorModel& m, Workspace& ws,
             double eps) {
  ks.left_gram(m.w, ws.ratio, ws.numer);
  const std::size_t k_count = m.k();
  const std::size_t n = m.n();
  if (p.mask) {
    ks.left_gram(m.w, *p.mask, ws.denom);
    for (std::size_t k = 0; k < k_count; ++k) {
      for (std::size_t j = 0; j < n; ++j) {
        double& hkj = m.h(k, j);
        hkj = hkj * ws.numer(k, j) / std::max(ws.denom(k, j) + m.beta[k] * hkj, eps);
      }
    }
  } else {
    auto wsum = kernels::column_sums(m.w);
    for (std::size_t k = 0; k < k_count; ++k) {
      for (std::size_t j = 0; j < n; ++j) {
        double& hkj = m.h(k, j);
        hkj = hkj * ws.numer(k, j) / std::max(wsum[k] + m.beta[k] * hkj, eps);
      }
    }
  }
}

// Recomputes the rate from the current (freshly updated) H before stepping W.
void sweep_w(const kernels::KernelSet& ks, const Problem& p, FactorModel& m, Workspace& ws,
             double eps) {
  ks.rate_ratio(m.w, m.h, p.x, p.mask_ptr(), eps, ws.rate, ws.ratio);
  m.h.transpose_into(ws.ht);
  ks.right_gram(ws.ratio, ws.ht, ws.numer);
  const std::size_t k_count = m.k();
  const std::size_t n = m.n();
  if (p.mask) {
    ks.right_gram(*p.mask, ws.ht, ws.denom);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < k_count; ++k) {
        double& wik = m.w(i, k);
        wik = wik * ws.numer(i, k) / std::max(ws.denom(i, k) + wik * m.beta[k], eps);
      }
    }
  } else {
    auto hsum = kernels::row_sums(m.h);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < k_count; ++k) {
        double& wik = m.w(i, k);
        wik = wik * ws.numer(i, k) / std::max(hsum[k] + wik * m.beta[k], eps);
      }
    }
  }
}

double energy_of(const kernels::KernelSet& ks, const Problem& p, const FactorModel& m,
                 const RealMatrix& rate, const Hyperparameters& hp) {
  return ks.poisson_nll(p.x, p.mask_ptr(), rate, p.log_fact, hp.eps) +
         neg_log_prior(m.w, m.h, m.beta) + neg_log_hyperprior(m.beta, hp);
}

// Energy at ws.rate; leaves the matching ratio in ws.ratio for the next H step.
double energy_and_ratio(const kernels::KernelSet& ks, const Problem& p, const FactorModel& m,
                        Workspace& ws, const Hyperparameters& hp) {
  return ks.poisson_nll_ratio(p.x, p.mask_ptr(), ws.rate, p.log_fact, hp.eps, ws.ratio) +
         neg_log_prior(m.w, m.h, m.beta) + neg_log_hyperprior(m.beta, hp);
}

[[maybe_unused]] bool valid_state(const FactorModel& m) {
  auto nonneg = [](const RealMatrix& a) {
    return std::all_of(a.values().begin(), a.values().end(), [](double v) { return v >= 0.0; });
  };
  return nonneg(m.w) && nonneg(m.h) &&
         std::all_of(m.beta.begin(), m.beta.end(), [](double b) { return b > 0.0; });
}

FitResult run_fit(const SimilarityMatrix& x, const BinaryMatrix* mask, const Hyperparameters& hp,
                  std::uint64_t seed, Backend backend) {
  hp.validate();
  const auto& ks = kernels::kernel_set(backend);
  const std::size_t n = x.n();
  if (n == 0) throw ContractViolation("cannot fit an empty matrix");
  Problem p = make_problem(x, mask);

  double total = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (p.mask && (*p.mask)(i, j) == 0.0) continue;
      total += p.x(i, j);
      count += 1.0;
    }
  }

  FitResult result;
  result.seed = seed;
  FactorModel m = initial_model(n, hp.resolved_k0(n), total / count, seed);
  Workspace ws;
  ks.rate(m.w, m.h, ws.rate);
  result.energy_trace.push_back(energy_and_ratio(ks, p, m, ws, hp));

  for (std::int64_t it = 0; it < hp.n_iter; ++it) {
    sweep_h(ks, p, m, ws, hp.eps);
    sweep_w(ks, p, m, ws, hp.eps);
    m.beta = update_beta(m, hp);
    assert(valid_state(m));

    ks.rate(m.w, m.h, ws.rate);
    const double u = energy_and_ratio(ks, p, m, ws, hp);
    const double prev = result.energy_trace.back();
    result.energy_trace.push_back(u);
    ++result.iterations_run;
    if (std::abs(u - prev) < hp.rel_tol * std::abs(prev)) break;
  }

  result.model = prune(m, hp.prune_tol);
  result.k_star = result.model.k();
  ks.rate(result.model.w, result.model.h, ws.rate);
  result.final_data_nll = ks.poisson_nll(p.x, p.mask_ptr(), ws.rate, p.log_fact, hp.eps);
  return result;
}

}  // namespace

double log_factorial(std::int64_t x) {
  if (x < 0) throw ContractViolation("log_factorial of a negative count");
  int sign = 0;
  return ::lgamma_r(static_cast<double>(x) + 1.0, &sign);
}

std::size_t Hyperparameters::resolved_k0(std::size_t n) const {
  if (k0) return static_cast<std::size_t>(*k0);
  return std::min<std::size_t>(n, 100);
}

void Hyperparameters::validate() const {
  require(a > 0.0 && std::isfinite(a), "hyperparameter a must be > 0");
  require(b > 0.0 && std::isfinite(b), "hyperparameter b must be > 0");
  require(!k0 || *k0 >= 1, "k0 must be >= 1");
  require(n_iter >= 1, "n_iter must be >= 1");
  require(rel_tol >= 0.0, "rel_tol must be >= 0");
  require(eps > 0.0, "eps must be > 0");
  require(prune_tol > 0.0, "prune_tol must be > 0");
}

void FactorModel::validate() const {
  const std::size_t k_count = beta.size();
  require(w.cols() == k_count && h.rows() == k_count, "w, h and beta must share K");
  require(w.rows() == h.cols(), "w rows must equal h columns");
  for (double v : w.values()) require(v >= 0.0, "w must be nonnegative");
  for (double v : h.values()) require(v >= 0.0, "h must be nonnegative");
  for (double b : beta) require(b > 0.0, "beta must be positive");
}

RealMatrix FactorModel::rate() const {
  RealMatrix out;
  kernels::serial::rate(w, h, out);
  return out;
}

double poisson_nll(const SimilarityMatrix& x, const FactorModel& m, double eps) {
  check_shapes(x.n(), m);
  Problem p = make_problem(x, nullptr);
  RealMatrix rate;
  kernels::parallel::rate(m.w, m.h, rate);
  return kernels::parallel::poisson_nll(p.x, nullptr, rate, p.log_fact, eps);
}

double neg_log_prior(const RealMatrix& w, const RealMatrix& h, std::span<const double> beta) {
  const std::size_t k_count = beta.size();
  require(w.cols() == k_count && h.rows() == k_count, "prior: w, h and beta must share K");
  for (double b : beta) require(b > 0.0, "prior: beta must be positive");
  std::vector<double> wsq(k_count, 0.0);
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t k = 0; k < k_count; ++k) wsq[k] += w(i, k) * w(i, k);
  const double n_w = static_cast<double>(w.rows());
  const double n_h = static_cast<double>(h.cols());
  double total = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    double hsq = 0.0;
    for (double v : h.row(k)) hsq += v * v;
    const double log_b = std::log(beta[k]);
    total += 0.5 * beta[k] * wsq[k] - 0.5 * n_w * log_b;
    total += 0.5 * beta[k] * hsq - 0.5 * n_h * log_b;
  }
  return total;
}

double neg_log_hyperprior(std::span<const double> beta, const Hyperparameters& hp) {
  double total = 0.0;
  for (double b : beta) {
    require(b > 0.0, "hyperprior: beta must be positive");
    total += b * hp.b - (hp.a - 1.0) * std::log(b);
  }
  return total;
}

double energy(const SimilarityMatrix& x, const FactorModel& m, const Hyperparameters& hp) {
  return poisson_nll(x, m, hp.eps) + neg_log_prior(m.w, m.h, m.beta) +
         neg_log_hyperprior(m.beta, hp);
}

double masked_energy(const SimilarityMatrix& x, const BinaryMatrix& mask, const FactorModel& m,
                     const Hyperparameters& hp) {
  check_shapes(x.n(), m);
  Problem p = make_problem(x, &mask);
  RealMatrix rate;
  kernels::parallel::rate(m.w, m.h, rate);
  return energy_of(kernels::kernel_set(Backend::parallel), p, m, rate, hp);
}

RealMatrix update_h(const SimilarityMatrix& x, const FactorModel& m, const Hyperparameters& hp) {
  check_shapes(x.n(), m);
  Problem p = make_problem(x, nullptr);
  const auto& ks = kernels::kernel_set(Backend::parallel);
  FactorModel next = m;
  Workspace ws;
  ks.rate_ratio(next.w, next.h, p.x, nullptr, hp.eps, ws.rate, ws.ratio);
  sweep_h(ks, p, next, ws, hp.eps);
  return next.h;
}

RealMatrix update_w(const SimilarityMatrix& x, const FactorModel& m, const Hyperparameters& hp) {
  check_shapes(x.n(), m);
  Problem p = make_problem(x, nullptr);
  const auto& ks = kernels::kernel_set(Backend::parallel);
  FactorModel next = m;
  Workspace ws;
  sweep_w(ks, p, next, ws, hp.eps);
  return next.w;
}

std::vector<double> update_beta(const FactorModel& m, const Hyperparameters& hp) {
  const std::size_t k_count = m.k();
  const double n = static_cast<double>(m.n());
  std::vector<double> sq(k_count, 0.0);
  for (std::size_t i = 0; i < m.w.rows(); ++i)
    for (std::size_t k = 0; k < k_count; ++k) sq[k] += m.w(i, k) * m.w(i, k);
  std::vector<double> out(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    double hsq = 0.0;
    for (double v : m.h.row(k)) hsq += v * v;
    out[k] = (n + hp.a - 1.0) / (0.5 * (sq[k] + hsq) + hp.b);
  }
  return out;
}

FactorModel prune(const FactorModel& m, double prune_tol) {
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < m.k(); ++k) {
    double wmax = 0.0;
    for (std::size_t i = 0; i < m.w.rows(); ++i) wmax = std::max(wmax, m.w(i, k));
    double hmax = 0.0;
    for (double v : m.h.row(k)) hmax = std::max(hmax, v);
    if (wmax >= prune_tol || hmax >= prune_tol) keep.push_back(k);
  }
  if (keep.size() == m.k()) return m;

  FactorModel out{RealMatrix(m.w.rows(), keep.size()), RealMatrix(keep.size(), m.h.cols()), {}};
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const std::size_t k = keep[c];
    for (std::size_t i = 0; i < m.w.rows(); ++i) out.w(i, c) = m.w(i, k);
    auto src = m.h.row(k);
    std::copy(src.begin(), src.end(), out.h.row(c).begin());
    out.beta.push_back(m.beta[k]);
  }
  return out;
}

FactorModel initial_model(std::size_t n, std::size_t k0, double data_mean, std::uint64_t seed) {
  require(k0 >= 1, "k0 must be >= 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double scale = std::sqrt(std::max(data_mean, 0.0) / static_cast<double>(k0));
  FactorModel m{RealMatrix(n, k0), RealMatrix(k0, n), std::vector<double>(k0, 1.0)};
  // 1 - U[0,1) lies in (0, 1].
  for (double& v : m.w.values()) v = scale * (1.0 - unit(rng));
  for (double& v : m.h.values()) v = scale * (1.0 - unit(rng));
  return m;
}

FitResult fit(const SimilarityMatrix& x, const Hyperparameters& hp, std::uint64_t seed,
              Backend backend) {
  return run_fit(x, nullptr, hp, seed, backend);
}

FitResult fit_masked(const SimilarityMatrix& x, const BinaryMatrix& mask, const Hyperparameters& hp,
                     std::uint64_t seed, Backend backend) {
  return run_fit(x, &mask, hp, seed, backend);
}

}  // namespace cdbnmf
