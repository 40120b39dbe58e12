#include "cdbnmf/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <numeric>

#include "cdbnmf/error.hpp"
#include "cdbnmf/random.hpp"

namespace cdbnmf {

SimilarityMatrix subsample(const SimilarityMatrix& x, std::size_t size, std::uint64_t seed) {
  require(size >= 1 && size <= x.n(), "subset size must be in [1, N]");
  std::vector<std::size_t> index(x.n());
  std::iota(index.begin(), index.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(index.begin(), index.end(), rng);
  index.resize(size);
  return x.principal_submatrix(index);
}

std::size_t holdout_count(std::size_t n, double fraction) {
  // The small offset keeps products like 0.1 * 50 from landing just below an integer.
  const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  return std::max<std::size_t>(count, 1);
}

HoldoutSplit holdout_split(const SimilarityMatrix& x, double fraction, std::uint64_t seed,
                           bool symmetric) {
  require(fraction > 0.0 && fraction < 1.0, "hold-out fraction must lie in (0, 1)");
  const std::size_t n = x.n();
  const std::size_t per_row = holdout_count(n, fraction);
  require(per_row < n, "hold-out leaves no training entry in a row (N too small)");

  HoldoutSplit split{BinaryMatrix(n, n, 1), {}, x};
  Rng rng(seed);
  std::vector<std::size_t> cols(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(cols.begin(), cols.end(), std::size_t{0});
    // Partial Fisher-Yates: the first per_row slots become a uniform sample.
    for (std::size_t t = 0; t < per_row; ++t) {
      std::uniform_int_distribution<std::size_t> pick(t, n - 1);
      std::swap(cols[t], cols[pick(rng)]);
    }
    for (std::size_t t = 0; t < per_row; ++t) {
      split.train_mask(i, cols[t]) = 0;
      if (symmetric) split.train_mask(cols[t], i) = 0;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    bool observed = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (split.train_mask(i, j) == 0)
        split.test_indices.emplace_back(i, j);
      else
        observed = true;
    }
    if (!observed)
      throw ContractViolation("hold-out removed every entry of row " + std::to_string(i));
  }
  return split;
}

FitResult masked_fit(const HoldoutSplit& split, const Hyperparameters& hp, std::uint64_t seed) {
  return fit_masked(split.x, split.train_mask, hp, seed);
}

HeldoutScore evaluate_heldout(const HoldoutSplit& split, const RealMatrix& predictions) {
  const std::size_t n = split.x.n();
  require(predictions.rows() == n && predictions.cols() == n, "prediction shape does not match the split");
  require(!split.test_indices.empty(), "split has no held-out entries");
  HeldoutScore score;
  double sq = 0.0;
  double nll = 0.0;
  bool defined = true;
  for (auto [i, j] : split.test_indices) {
    const double rate = predictions(i, j);
    require(rate >= 0.0, "predictions must be nonnegative");
    const std::int64_t count = split.x(i, j);
    const double diff = static_cast<double>(count) - rate;
    sq += diff * diff;
    if (rate == 0.0) {
      defined = false;
    } else if (defined) {
      nll += rate - static_cast<double>(count) * std::log(rate) + log_factorial(count);
    }
  }
  score.rmse = std::sqrt(sq / static_cast<double>(split.test_indices.size()));
  if (defined) score.nll = nll;
  return score;
}

RealMatrix pred_avg(const HoldoutSplit& split) {
  const std::size_t n = split.x.n();
  double total = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (split.train_mask(i, j)) {
        total += static_cast<double>(split.x(i, j));
        count += 1.0;
      }
  return RealMatrix(n, n, count > 0.0 ? total / count : 0.0);
}

RealMatrix pred_zero(const HoldoutSplit& split) { return RealMatrix(split.x.n(), split.x.n(), 0.0); }

RealMatrix bnmf_predictions(const FitResult& fit, double eps) {
  RealMatrix rate = fit.model.rate();
  for (double& v : rate.values()) v = std::max(v, eps);
  return rate;
}

const ModelScore& EvalReport::model(const std::string& name) const {
  for (const auto& m : models)
    if (m.model_name == name) return m;
  throw ContractViolation("no model named '" + name + "' in the report");
}

EvalReport benchmark(const SimilarityMatrix& x, const BenchmarkOptions& opts,
                     const Hyperparameters& hp, std::uint64_t seed) {
  require(opts.n_subsets >= 1, "benchmark needs at least one subset");
  require(opts.subset_size >= 1 && opts.subset_size <= x.n(), "subset size must be in [1, N]");
  require(opts.fraction > 0.0 && opts.fraction < 1.0, "hold-out fraction must lie in (0, 1)");
  hp.validate();

  static const char* kNames[] = {"BNMF", "Pred-Avg", "Pred-0"};
  std::vector<std::array<HeldoutScore, 3>> per_subset(opts.n_subsets);
  std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t ss = 0; ss < static_cast<std::ptrdiff_t>(opts.n_subsets); ++ss) {
    const auto s = static_cast<std::size_t>(ss);
    try {
      // Three independent streams per subset: rows, hold-out, initialization.
      const std::uint64_t base = derive_seed(seed, s);
      SimilarityMatrix sub = subsample(x, opts.subset_size, derive_seed(base, 0));
      HoldoutSplit split = holdout_split(sub, opts.fraction, derive_seed(base, 1), opts.symmetric_mask);
      FitResult f = masked_fit(split, hp, derive_seed(base, 2));
      per_subset[s][0] = evaluate_heldout(split, bnmf_predictions(f, hp.eps));
      per_subset[s][1] = evaluate_heldout(split, pred_avg(split));
      per_subset[s][2] = evaluate_heldout(split, pred_zero(split));
    } catch (...) {
#pragma omp critical(cdbnmf_benchmark_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  EvalReport report;
  report.n_subsets = opts.n_subsets;
  report.subset_size = opts.subset_size;
  report.fraction = opts.fraction;
  report.seed = seed;
  for (std::size_t m = 0; m < 3; ++m) {
    ModelScore score;
    score.model_name = kNames[m];
    double rmse = 0.0;
    double nll = 0.0;
    bool defined = true;
    for (const auto& subset : per_subset) {
      score.subset_rmse.push_back(subset[m].rmse);
      score.subset_nll.push_back(subset[m].nll);
      rmse += subset[m].rmse;
      if (subset[m].nll)
        nll += *subset[m].nll;
      else
        defined = false;
    }
    const double count = static_cast<double>(opts.n_subsets);
    score.rmse = rmse / count;
    if (defined) score.nll = nll / count;
    report.models.push_back(std::move(score));
  }
  return report;
}

}  // namespace cdbnmf
