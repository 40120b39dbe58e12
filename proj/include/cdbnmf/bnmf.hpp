#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cdbnmf/forum_data.hpp"
#include "cdbnmf/kernels.hpp"
#include "cdbnmf/matrix.hpp"

namespace cdbnmf {

using kernels::Backend;

// Gamma(shape a, rate b) hyperprior on the ARD precisions plus loop controls.
struct Hyperparameters {
  double a = 5.0;
  double b = 2.0;
  // Initial community count. Unset means min(N, 100).
  std::optional<std::int64_t> k0;
  std::int64_t n_iter = 2000;
  // Stop once |U_t - U_{t-1}| < rel_tol * |U_{t-1}|.
  double rel_tol = 1e-9;
  // Floor for every denominator and every rate inside a log.
  double eps = 1e-12;
  // A community is pruned when both its W column and H row stay below this.
  double prune_tol = 1e-6;

  std::size_t resolved_k0(std::size_t n) const;
  void validate() const;
};

// Nonnegative factors of the Poisson rate X^ = W H with ARD precisions beta.
struct FactorModel {
  RealMatrix w;               // N x K
  RealMatrix h;               // K x N
  std::vector<double> beta;   // K

  std::size_t n() const noexcept { return w.rows(); }
  std::size_t k() const noexcept { return beta.size(); }
  bool empty() const noexcept { return beta.empty(); }
  void validate() const;
  RealMatrix rate() const;

  friend bool operator==(const FactorModel&, const FactorModel&) = default;
};

struct FitResult {
  FactorModel model;   // pruned
  std::size_t k_star = 0;
  // U at initialization followed by U after every completed sweep.
  std::vector<double> energy_trace;
  // Exact Poisson NLL of the (observed) data under the pruned model.
  double final_data_nll = 0.0;
  std::size_t iterations_run = 0;
  std::uint64_t seed = 0;

  // Every community was pruned; assignment must reject this result.
  bool empty() const noexcept { return k_star == 0; }

  friend bool operator==(const FitResult&, const FitResult&) = default;
};

// Exact Poisson negative log-likelihood, sum_ij [r - x log r + log x!] with
// r = max((WH)_ij, eps).
double poisson_nll(const SimilarityMatrix& x, const FactorModel& m, double eps = 1e-12);

// Half-normal column/row priors with constants dropped:
// sum_k [ 1/2 beta_k (|w_k|^2 + |h_k|^2) - N log beta_k ].
double neg_log_prior(const RealMatrix& w, const RealMatrix& h, std::span<const double> beta);

// Gamma hyperprior with constants dropped: sum_k [ b beta_k - (a - 1) log beta_k ].
double neg_log_hyperprior(std::span<const double> beta, const Hyperparameters& hp);

// Negative log posterior U (likelihood + prior + hyperprior).
double energy(const SimilarityMatrix& x, const FactorModel& m, const Hyperparameters& hp);

// One multiplicative step on H: H o [W^T (X / WH)] / (W^T 1 + diag(beta) H).
RealMatrix update_h(const SimilarityMatrix& x, const FactorModel& m, const Hyperparameters& hp);

// One multiplicative step on W: W o [(X / WH) H^T] / (1 H^T + W diag(beta)).
RealMatrix update_w(const SimilarityMatrix& x, const FactorModel& m, const Hyperparameters& hp);

// Closed-form minimizer of U over each beta_k:
// (N + a - 1) / (1/2 (|w_k|^2 + |h_k|^2) + b).
std::vector<double> update_beta(const FactorModel& m, const Hyperparameters& hp);

// Drops every community whose W column and H row both have max < prune_tol.
// Survivors keep their order. May return an empty model.
FactorModel prune(const FactorModel& m, double prune_tol);

// Seeded random initialization used by fit.
FactorModel initial_model(std::size_t n, std::size_t k0, double data_mean, std::uint64_t seed);

// MAP inference: alternating H, W, beta updates from a seeded start until
// n_iter sweeps or the relative energy change drops below rel_tol, then prune.
// Bit-reproducible for a given (x, hp, seed) and independent of thread count.
FitResult fit(const SimilarityMatrix& x, const Hyperparameters& hp, std::uint64_t seed,
              Backend backend = Backend::parallel);

// Same loop restricted to observed entries: the likelihood, the ratios and
// the update denominators only see cells with mask(i, j) = 1. energy_trace
// and final_data_nll refer to the masked objective.
FitResult fit_masked(const SimilarityMatrix& x, const BinaryMatrix& mask, const Hyperparameters& hp,
                     std::uint64_t seed, Backend backend = Backend::parallel);

// Energy of the masked objective (used by tests of fit_masked).
double masked_energy(const SimilarityMatrix& x, const BinaryMatrix& mask, const FactorModel& m,
                     const Hyperparameters& hp);

// log(x!) for a nonnegative integer count.
double log_factorial(std::int64_t x);

}  // namespace cdbnmf
