// Serial reference vs OpenMP kernels, plus whole-fit throughput.
//
//   ./build/bench/kernel_bench --benchmark_filter=Rate
//
// The size argument is N; K is the second argument.

#include <benchmark/benchmark.h>

#include "cdbnmf/bnmf.hpp"
#include "cdbnmf/kernels.hpp"
#include "cdbnmf/random.hpp"
#include "cdbnmf/synthetic.hpp"

namespace {

using namespace cdbnmf;

RealMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RealMatrix m(rows, cols);
  for (double& v : m.values()) v = unit(rng);
  return m;
}

struct Fixture {
  RealMatrix w, h, ht, x, rate, ratio, log_fact, out;

  Fixture(std::size_t n, std::size_t k)
      : w(random_matrix(n, k, 1)), h(random_matrix(k, n, 2)), x(n, n), log_fact(n, n) {
    Rng rng(3);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        x(i, j) = static_cast<double>(draw_poisson(rng, 2.0));
        log_fact(i, j) = log_factorial(static_cast<std::int64_t>(x(i, j)));
      }
    ht = h.transposed();
    kernels::serial::rate(w, h, rate);
    kernels::serial::ratio(x, nullptr, rate, 1e-12, ratio);
  }
};

template <kernels::Backend B>
void BM_Rate(benchmark::State& state) {
  Fixture f(state.range(0), state.range(1));
  const auto& ks = kernels::kernel_set(B);
  for (auto _ : state) {
    ks.rate(f.w, f.h, f.out);
    benchmark::DoNotOptimize(f.out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0) * state.range(1));
}

template <kernels::Backend B>
void BM_LeftGram(benchmark::State& state) {
  Fixture f(state.range(0), state.range(1));
  const auto& ks = kernels::kernel_set(B);
  for (auto _ : state) {
    ks.left_gram(f.w, f.ratio, f.out);
    benchmark::DoNotOptimize(f.out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0) * state.range(1));
}

template <kernels::Backend B>
void BM_RightGram(benchmark::State& state) {
  Fixture f(state.range(0), state.range(1));
  const auto& ks = kernels::kernel_set(B);
  for (auto _ : state) {
    ks.right_gram(f.ratio, f.ht, f.out);
    benchmark::DoNotOptimize(f.out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0) * state.range(1));
}

template <kernels::Backend B>
void BM_Ratio(benchmark::State& state) {
  Fixture f(state.range(0), state.range(1));
  const auto& ks = kernels::kernel_set(B);
  for (auto _ : state) {
    ks.ratio(f.x, nullptr, f.rate, 1e-12, f.out);
    benchmark::DoNotOptimize(f.out.data());
  }
}

template <kernels::Backend B>
void BM_PoissonNll(benchmark::State& state) {
  Fixture f(state.range(0), state.range(1));
  const auto& ks = kernels::kernel_set(B);
  for (auto _ : state) benchmark::DoNotOptimize(ks.poisson_nll(f.x, nullptr, f.rate, f.log_fact, 1e-12));
}

template <kernels::Backend B>
void BM_Fit(benchmark::State& state) {
  auto sample = sample_planted(PlantedSpec::balanced(state.range(0), 3, 8.0, 0.5, 7));
  Hyperparameters hp;
  hp.k0 = state.range(1);
  hp.n_iter = 50;
  hp.rel_tol = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(fit(sample.x, hp, 11, B).final_data_nll);
  state.SetItemsProcessed(state.iterations() * hp.n_iter);
}

void Sizes(benchmark::internal::Benchmark* b) {
  b->Args({30, 30})->Args({50, 50})->Args({200, 20})->Args({1387, 50});
}

constexpr auto kSerial = kernels::Backend::serial;
constexpr auto kParallel = kernels::Backend::parallel;

BENCHMARK(BM_Rate<kSerial>)->Apply(Sizes);
BENCHMARK(BM_Rate<kParallel>)->Apply(Sizes);
BENCHMARK(BM_LeftGram<kSerial>)->Apply(Sizes);
BENCHMARK(BM_LeftGram<kParallel>)->Apply(Sizes);
BENCHMARK(BM_RightGram<kSerial>)->Apply(Sizes);
BENCHMARK(BM_RightGram<kParallel>)->Apply(Sizes);
BENCHMARK(BM_Ratio<kSerial>)->Apply(Sizes);
BENCHMARK(BM_Ratio<kParallel>)->Apply(Sizes);
BENCHMARK(BM_PoissonNll<kSerial>)->Apply(Sizes);
BENCHMARK(BM_PoissonNll<kParallel>)->Apply(Sizes);
BENCHMARK(BM_Fit<kSerial>)->Args({60, 10})->Args({200, 20})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Fit<kParallel>)->Args({60, 10})->Args({200, 20})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
