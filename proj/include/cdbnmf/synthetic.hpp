#pragma once

#include <cstdint>
#include <vector>

#include "cdbnmf/bnmf.hpp"
#include "cdbnmf/forum_data.hpp"
#include "cdbnmf/random.hpp"

namespace cdbnmf {

// Planted-partition generator: Poisson(within_rate) inside a community,
// Poisson(between_rate) across communities. Learners are laid out in
// community order (community 0 first).
struct PlantedSpec {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<std::size_t> sizes;
  double within_rate = 0.0;
  double between_rate = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  // Sizes as equal as possible, the first n % k communities one larger.
  static PlantedSpec balanced(std::size_t n, std::size_t k, double within, double between,
                              std::uint64_t seed);
};

struct PlantedSample {
  std::vector<std::size_t> labels;
  SimilarityMatrix x;
};

PlantedSample sample_planted(const PlantedSpec& spec);

struct GenerativeSample {
  FactorModel model;
  SimilarityMatrix x;
};

// Draws beta_k ~ Gamma(a, rate b), w_ik and h_kj ~ |Normal(0, 1/beta_k)|, then
// x_ij ~ Poisson((WH)_ij) for i <= j, mirrored below the diagonal.
GenerativeSample sample_generative(std::size_t n, std::size_t k, const Hyperparameters& hp,
                                   std::uint64_t seed);

// Poisson draw that accepts a zero rate.
std::int64_t draw_poisson(Rng& rng, double rate);

}  // namespace cdbnmf
