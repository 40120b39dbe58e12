#include "cdbnmf/synthetic.hpp"

#include <cmath>
#include <numeric>

#include "cdbnmf/error.hpp"
#include "cdbnmf/random.hpp"

namespace cdbnmf {

void PlantedSpec::validate() const {
  require(n >= 1 && k >= 1, "planted spec needs n >= 1 and k >= 1");
  require(sizes.size() == k, "planted spec needs one size per community");
  require(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) == n,
          "planted community sizes must sum to n");
  require(between_rate >= 0.0 && within_rate > between_rate,
          "planted rates must satisfy within > between >= 0");
}

PlantedSpec PlantedSpec::balanced(std::size_t n, std::size_t k, double within, double between,
                                  std::uint64_t seed) {
  require(k >= 1 && n >= k, "balanced planted spec needs 1 <= k <= n");
  PlantedSpec spec{n, k, std::vector<std::size_t>(k, n / k), within, between, seed};
  for (std::size_t c = 0; c < n % k; ++c) ++spec.sizes[c];
  return spec;
}

std::int64_t draw_poisson(Rng& rng, double rate) {
  if (rate <= 0.0) return 0;
  return std::poisson_distribution<std::int64_t>(rate)(rng);
}

PlantedSample sample_planted(const PlantedSpec& spec) {
  spec.validate();
  std::vector<std::size_t> labels;
  labels.reserve(spec.n);
  for (std::size_t c = 0; c < spec.k; ++c) labels.insert(labels.end(), spec.sizes[c], c);

  Rng rng(spec.seed);
  CountMatrix x(spec.n, spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (std::size_t j = i; j < spec.n; ++j) {
      const double rate = labels[i] == labels[j] ? spec.within_rate : spec.between_rate;
      x(i, j) = x(j, i) = draw_poisson(rng, rate);
    }
  }
  return {std::move(labels), SimilarityMatrix(std::move(x))};
}

GenerativeSample sample_generative(std::size_t n, std::size_t k, const Hyperparameters& hp,
                                   std::uint64_t seed) {
  require(n >= 1 && k >= 1, "generative sample needs n >= 1 and k >= 1");
  require(hp.a > 0.0 && hp.b > 0.0, "generative sample needs a > 0 and b > 0");
  Rng rng(seed);
  FactorModel m{RealMatrix(n, k), RealMatrix(k, n), std::vector<double>(k)};
  std::gamma_distribution<double> gamma(hp.a, 1.0 / hp.b);
  for (double& b : m.beta) b = gamma(rng);
  for (std::size_t c = 0; c < k; ++c) {
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(m.beta[c]));
    for (std::size_t i = 0; i < n; ++i) m.w(i, c) = std::abs(normal(rng));
    for (std::size_t j = 0; j < n; ++j) m.h(c, j) = std::abs(normal(rng));
  }
  const RealMatrix rate = m.rate();
  CountMatrix x(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) x(i, j) = x(j, i) = draw_poisson(rng, rate(i, j));
  return {std::move(m), SimilarityMatrix(std::move(x))};
}

}  // namespace cdbnmf
