#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cdbnmf/communities.hpp"
#include "cdbnmf/error.hpp"
#include "cdbnmf/random.hpp"
#include "cdbnmf/synthetic.hpp"
#include "oracles.hpp"

using namespace cdbnmf;

namespace {

FactorModel model_from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size(), k = rows.front().size();
  FactorModel m{RealMatrix(n, k), RealMatrix(k, n, 0.5), std::vector<double>(k, 1.0)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) m.w(i, c) = rows[i][c];
  return m;
}

FitResult fit_of(FactorModel m) {
  FitResult f;
  f.k_star = m.k();
  f.model = std::move(m);
  return f;
}

}  // namespace

TEST_SUITE("communities") {
  TEST_CASE("soft membership examples") {
    auto p = soft_membership(model_from_rows({{2, 2, 0}, {0.1, 0.7, 0.2}, {0, 0, 0}}), {"a", "b", "c"});
    CHECK(p[0].distribution == std::vector<double>{0.5, 0.5, 0.0});
    CHECK(p[0].hard_label == 0);  // tie goes to the lower index
    CHECK(p[1].hard_label == 1);
    CHECK(p[2].unassigned);
    CHECK(p[2].learner_id == "c");
    CHECK(p[1].degree_of_participation == std::vector<double>{0.1, 0.7, 0.2});
  }

  TEST_CASE("soft membership rejects an empty model") {
    FactorModel empty{RealMatrix(3, 0), RealMatrix(0, 3), {}};
    CHECK_THROWS_AS(soft_membership(empty), ContractViolation);
    CHECK_THROWS_AS(assign_communities(fit_of(empty), {}), NumericalFailure);
  }

  TEST_CASE("normalization and scale invariance") {
    auto w = oracle::random_real(30, 5, 4);
    FactorModel m{w, RealMatrix(5, 30, 1.0), std::vector<double>(5, 1.0)};
    auto scaled = m;
    for (std::size_t i = 0; i < 30; ++i)
      for (std::size_t k = 0; k < 5; ++k) scaled.w(i, k) *= 1.0 + 3.7 * static_cast<double>(i);
    auto a = soft_membership(m), b = soft_membership(scaled);
    for (std::size_t i = 0; i < 30; ++i) {
      double s = 0;
      for (double v : a[i].distribution) s += v;
      CHECK(std::abs(s - 1.0) < 1e-9);
      CHECK(a[i].hard_label == b[i].hard_label);
      for (std::size_t k = 0; k < 5; ++k)
        CHECK(a[i].distribution[k] == doctest::Approx(b[i].distribution[k]).epsilon(1e-12));
    }
  }

  TEST_CASE("report sizes and singleton filtering") {
    auto f = fit_of(model_from_rows({{1, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 0}, {0.5, 0, 0.1}}));
    auto r = assign_communities(f, {"a", "b", "c", "d", "e"});
    CHECK(r.community_sizes == std::vector<std::size_t>{3, 0, 0});
    CHECK(r.filtered_singletons == std::vector<std::string>{"c"});
    CHECK(r.analysed_communities() == std::vector<std::size_t>{0});
    CHECK_FALSE(r.analysed(r.assignments[2]));
    CHECK_FALSE(r.analysed(r.assignments[3]));
    std::size_t total = 0;
    for (auto s : r.community_sizes) total += s;
    CHECK(total + r.filtered_singletons.size() == 4);  // N minus the unassigned learner
    auto labels = hard_labels(r, 99);
    CHECK(labels == std::vector<std::size_t>{0, 0, 99, 99, 0});
  }

  TEST_CASE("restart selection rule") {
    std::vector<RestartOutcome> o{{11, 5.0, 2}, {12, 3.0, 2}, {13, 3.0, 3}, {14, 1.0, 0}};
    CHECK(select_best_restart(o) == 1u);  // 14 is empty, 13 ties later
    CHECK_FALSE(select_best_restart({{1, 1.0, 0}, {2, 2.0, 0}}).has_value());
    CHECK(select_best_restart({{1, 2.0, 1}, {2, 4.0, 1}}) == 0u);
  }

  TEST_CASE("selection is the minimum over every restart set of size 10") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 10);
    std::uniform_int_distribution<int> k(0, 3);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<RestartOutcome> o;
      for (std::uint64_t r = 0; r < 10; ++r) o.push_back({r, std::round(u(rng)), static_cast<std::size_t>(k(rng))});
      auto best = select_best_restart(o);
      std::optional<std::size_t> brute;
      for (std::size_t r = 0; r < 10; ++r)
        if (o[r].k_star > 0 && (!brute || o[r].data_nll < o[*brute].data_nll)) brute = r;
      CHECK(best == brute);
    }
  }

  TEST_CASE("best_of_restarts picks the lowest data NLL and is deterministic") {
    Hyperparameters hp;
    hp.k0 = 6;
    auto sample = sample_planted(PlantedSpec::balanced(24, 3, 8.0, 0.5, 3));
    std::vector<RestartOutcome> outcomes;
    auto r = best_of_restarts(sample.x, hp, 10, 42, &outcomes);
    REQUIRE(outcomes.size() == 10);
    double best = outcomes[0].data_nll;
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(outcomes[i].seed == derive_seed(42, i));
      CHECK(fit(sample.x, hp, outcomes[i].seed).final_data_nll == outcomes[i].data_nll);
      best = std::min(best, outcomes[i].data_nll);
    }
    CHECK(r.best_data_nll == best);
    CHECK(r.restarts_used == 10);
    auto again = best_of_restarts(sample.x, hp, 10, 42);
    CHECK(hard_labels(again) == hard_labels(r));
    CHECK(again.best_seed == r.best_seed);
  }

  TEST_CASE("a single restart equals one fit plus assignment") {
    Hyperparameters hp;
    hp.k0 = 5;
    auto sample = sample_planted(PlantedSpec::balanced(20, 2, 6.0, 0.5, 4));
    auto r = best_of_restarts(sample.x, hp, 1, 7);
    auto direct = assign_communities(fit(sample.x, hp, derive_seed(7, 0)), sample.x.learner_ids());
    CHECK(r.best_seed == derive_seed(7, 0));
    CHECK(hard_labels(r) == hard_labels(direct));
    CHECK(r.community_sizes == direct.community_sizes);
    CHECK_THROWS_AS(best_of_restarts(sample.x, hp, 0, 7), ContractViolation);
  }

  TEST_CASE("all restarts empty is an explicit failure") {
    Hyperparameters hp;
    hp.k0 = 3;
    CHECK_THROWS_AS(best_of_restarts(SimilarityMatrix(CountMatrix(5, 5, 0)), hp, 3, 1), NumericalFailure);
  }

  TEST_CASE("kruskal-wallis reference values") {
    auto r = kruskal_wallis({{1, 2, 3}, {4, 5, 6}});
    CHECK(r.h_statistic == doctest::Approx(27.0 / 7.0).epsilon(1e-12));
    CHECK(std::abs(r.h_statistic - 3.8571) < 1e-3);
    CHECK(r.dof == 1);
    CHECK(r.p_value == doctest::Approx(std::erfc(std::sqrt(r.h_statistic / 2.0))).epsilon(1e-10));

    auto tied = kruskal_wallis({{5}, {5}, {5}});
    CHECK(tied.h_statistic == 0.0);
    CHECK(tied.p_value == 1.0);

    auto same = kruskal_wallis({{1, 2}, {1, 2}});
    CHECK(same.h_statistic == doctest::Approx(0.0));
    CHECK(same.p_value == doctest::Approx(1.0));

    CHECK_THROWS_AS(kruskal_wallis({{1, 2, 3}}), ContractViolation);
    CHECK_THROWS_AS(kruskal_wallis({{1}, {}}), ContractViolation);
    CHECK_THROWS_AS(kruskal_wallis({{1}, {2}}), ContractViolation);
  }

  TEST_CASE("kruskal-wallis with ties against a hand-computed value") {
    // Pooled 1,2,2,3,3,3 -> ranks 1, 2.5, 2.5, 5, 5, 5. Groups {1,2,3} and {2,3,3}:
    // R = 8.5, 12.5; H0 = 12/42 (8.5^2/3 + 12.5^2/3) - 21 = 0.7619...; ties C = 1 - 30/210.
    auto r = kruskal_wallis({{1, 2, 3}, {2, 3, 3}});
    const double h0 = 12.0 / 42.0 * (8.5 * 8.5 / 3 + 12.5 * 12.5 / 3) - 21.0;
    CHECK(r.h_statistic == doctest::Approx(h0 / (1.0 - 30.0 / 210.0)).epsilon(1e-12));
  }

  TEST_CASE("kruskal-wallis is invariant under monotone transforms") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 20; ++t) {
      std::vector<std::vector<double>> g(3), e(3);
      for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 5 + k; ++i) {
          const double v = std::round(nd(rng) * 3) + k * 0.5;
          g[k].push_back(v);
          e[k].push_back(std::exp(v) * 2 + 1);
        }
      auto a = kruskal_wallis(g), b = kruskal_wallis(e);
      CHECK(a.h_statistic == doctest::Approx(b.h_statistic).epsilon(1e-12));
      CHECK(a.p_value == doctest::Approx(b.p_value).epsilon(1e-12));
    }
  }

  TEST_CASE("chi-square survival") {
    CHECK(chi_square_survival(0.0, 3) == 1.0);
    CHECK(chi_square_survival(2.0, 2) == doctest::Approx(std::exp(-1.0)));
    CHECK(chi_square_survival(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
  }

  TEST_CASE("adjusted rand index matches pair counting") {
    CHECK(adjusted_rand_index({0, 0, 1, 1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
    std::mt19937_64 rng(2);
    for (int t = 0; t < 100; ++t) {
      std::uniform_int_distribution<std::size_t> n(2, 60), ka(1, 5), kb(1, 5);
      const std::size_t sz = n(rng);
      std::uniform_int_distribution<std::size_t> la(0, ka(rng) - 1), lb(0, kb(rng) - 1);
      std::vector<std::size_t> a(sz), b(sz);
      for (std::size_t i = 0; i < sz; ++i) {
        a[i] = la(rng);
        b[i] = (t % 3 == 0) ? a[i] : lb(rng);
      }
      CHECK(adjusted_rand_index(a, b) == doctest::Approx(oracle::adjusted_rand_index(a, b)).epsilon(1e-12));
    }
  }

  TEST_CASE("attribute table and crosstab") {
    auto f = fit_of(model_from_rows({{1, 0}, {1, 0}, {0, 1}, {0, 1}}));
    auto r = assign_communities(f, {"a", "b", "c", "d"});
    std::istringstream in(
        "learner_id,passed,score,country\n"
        "a,1,10,uk\nb,1,12,\nc,0,10,fr\nd,0,12,fr\nzz,1,3,uk\n");
    auto table = load_attribute_table(in);
    auto p = group_crosstab(r, table);
    CHECK(p.communities == std::vector<std::size_t>{0, 1});
    CHECK(p.members == std::vector<std::size_t>{2, 2});
    CHECK(p.skipped_count == 1);

    const RealSummary* passed = nullptr;
    const RealSummary* score = nullptr;
    for (const auto& s : p.real) {
      if (s.attribute == "passed") passed = &s;
      if (s.attribute == "score") score = &s;
    }
    REQUIRE(passed);
    REQUIRE(score);
    CHECK(*passed->means[0] == 1.0);
    CHECK(*passed->means[1] == 0.0);
    REQUIRE(score->test);
    CHECK(score->test->p_value == doctest::Approx(1.0));

    REQUIRE(p.categorical.size() == 1);
    const auto& country = p.categorical[0];
    CHECK(country.counts[0].at("uk") == 1);
    CHECK(country.proportions[0].at("uk") == 1.0);  // the empty cell is missing
    CHECK(country.proportions[1].at("fr") == 1.0);
  }

  TEST_CASE("crosstab with no overlap fails") {
    auto f = fit_of(model_from_rows({{1, 0}, {1, 0}}));
    auto r = assign_communities(f, {"a", "b"});
    std::istringstream in("learner_id,x\nq,1\n");
    CHECK_THROWS_AS(group_crosstab(r, load_attribute_table(in)), ValidationError);
    std::istringstream dup("learner_id,x\na,1\na,2\n");
    CHECK_THROWS_AS(load_attribute_table(dup), ValidationError);
  }
}
