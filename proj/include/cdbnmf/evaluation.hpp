#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cdbnmf/bnmf.hpp"
#include "cdbnmf/forum_data.hpp"

namespace cdbnmf {

// Principal submatrix on `size` learners drawn uniformly without replacement,
// in random order.
SimilarityMatrix subsample(const SimilarityMatrix& x, std::size_t size, std::uint64_t seed);

struct HoldoutSplit {
  BinaryMatrix train_mask;  // 1 = observed
  std::vector<std::pair<std::size_t, std::size_t>> test_indices;
  SimilarityMatrix x;
};

// Per row, max(1, floor(fraction * N)) entries chosen uniformly are held out.
// With symmetric = true the mirror (j, i) of each held-out (i, j) is held out
// too. Every row keeps at least one training entry.
HoldoutSplit holdout_split(const SimilarityMatrix& x, double fraction, std::uint64_t seed,
                           bool symmetric = false);

// Held-out entries per row for a given N.
std::size_t holdout_count(std::size_t n, double fraction);

// Fits on the training entries only.
FitResult masked_fit(const HoldoutSplit& split, const Hyperparameters& hp, std::uint64_t seed);

struct HeldoutScore {
  double rmse = 0.0;
  std::optional<double> nll;  // undefined when any held-out rate is exactly 0
};

HeldoutScore evaluate_heldout(const HoldoutSplit& split, const RealMatrix& predictions);

// Mean of all observed entries, broadcast to an N x N prediction.
RealMatrix pred_avg(const HoldoutSplit& split);
RealMatrix pred_zero(const HoldoutSplit& split);
// max(WH, eps) from a fitted model.
RealMatrix bnmf_predictions(const FitResult& fit, double eps);

struct ModelScore {
  std::string model_name;
  double rmse = 0.0;
  std::optional<double> nll;
  std::vector<double> subset_rmse;
  std::vector<std::optional<double>> subset_nll;
};

struct EvalReport {
  std::vector<ModelScore> models;  // BNMF, Pred-Avg, Pred-0
  std::size_t n_subsets = 0;
  std::size_t subset_size = 0;
  double fraction = 0.0;
  std::uint64_t seed = 0;

  const ModelScore& model(const std::string& name) const;
};

struct BenchmarkOptions {
  std::size_t n_subsets = 20;
  std::size_t subset_size = 50;
  double fraction = 0.1;
  bool symmetric_mask = false;
};

// For each subset: subsample, split, masked BNMF fit plus baselines, score.
// Per-model scores are arithmetic means over subsets; a model's NLL is
// undefined if it is undefined on any subset.
EvalReport benchmark(const SimilarityMatrix& x, const BenchmarkOptions& opts,
                     const Hyperparameters& hp, std::uint64_t seed);

}  // namespace cdbnmf
