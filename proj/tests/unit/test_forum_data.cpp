#include <doctest.h>

#include <random>
#include <sstream>

#include "cdbnmf/csv.hpp"
#include "cdbnmf/error.hpp"
#include "cdbnmf/forum_data.hpp"
#include "oracles.hpp"

using namespace cdbnmf;

namespace {

LearnerCategoryMatrix from_rows(const std::vector<std::vector<int>>& rows) {
  BinaryMatrix c(rows.size(), rows.front().size());
  std::vector<std::string> learners, cats;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    learners.push_back("u" + std::to_string(i));
    for (std::size_t d = 0; d < rows[i].size(); ++d) c(i, d) = static_cast<std::uint8_t>(rows[i][d]);
  }
  for (std::size_t d = 0; d < rows.front().size(); ++d) cats.push_back("dim:c" + std::to_string(d));
  return LearnerCategoryMatrix(learners, cats, c);
}

CountMatrix counts(const std::vector<std::vector<std::int64_t>>& rows) {
  CountMatrix x(rows.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.size(); ++j) x(i, j) = rows[i][j];
  return x;
}

BinaryMatrix random_binary(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.4);
  std::uniform_int_distribution<std::size_t> col(0, d - 1);
  BinaryMatrix c(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) c(i, k) = coin(rng);
    c(i, col(rng)) = 1;  // no empty rows
  }
  return c;
}

LearnerCategoryMatrix wrap(const BinaryMatrix& c) {
  std::vector<std::string> learners, cats;
  for (std::size_t i = 0; i < c.rows(); ++i) learners.push_back("l" + std::to_string(i));
  for (std::size_t d = 0; d < c.cols(); ++d) cats.push_back("k" + std::to_string(d));
  return LearnerCategoryMatrix(learners, cats, c);
}

}  // namespace

TEST_SUITE("csv") {
  TEST_CASE("quoted fields, CRLF and blank lines") {
    std::istringstream in("a,\"b,c\",\"d\"\"e\"\r\n\n1,2,3\n");
    auto recs = csv::read(in);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].fields == std::vector<std::string>{"a", "b,c", "d\"e"});
    CHECK(recs[1].line == 3);
  }

  TEST_CASE("unterminated quote reports its line") {
    std::istringstream in("x,y\n\"open,1\n");
    try {
      csv::read(in);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }

  TEST_CASE("escape round trip") {
    std::istringstream in(csv::escape("a,\"b\"") + "," + csv::escape("plain") + "\n");
    auto recs = csv::read(in);
    CHECK(recs[0].fields == std::vector<std::string>{"a,\"b\"", "plain"});
  }
}

TEST_SUITE("forum-data") {
  TEST_CASE("load a 2x2 identity table") {
    std::istringstream in("learner_id,topic:a,topic:b\nu1,1,0\nu2,0,1\n");
    auto c = load_learner_category_matrix(in);
    CHECK(c.n_learners() == 2);
    CHECK(c.n_categories() == 2);
    CHECK(c.category_ids()[1] == "topic:b");
  }

  TEST_CASE("non-binary cell is a validation error") {
    std::istringstream in("learner_id,a,b\nu1,1,2\n");
    CHECK_THROWS_AS(load_learner_category_matrix(in), ValidationError);
  }

  TEST_CASE("duplicate learner id is a validation error") {
    std::istringstream in("learner_id,a\nu1,1\nu1,1\n");
    CHECK_THROWS_AS(load_learner_category_matrix(in), ValidationError);
  }

  TEST_CASE("duplicate category id is a validation error") {
    std::istringstream in("learner_id,a,a\nu1,1,0\n");
    CHECK_THROWS_AS(load_learner_category_matrix(in), ValidationError);
  }

  TEST_CASE("all-zero row names the learner") {
    std::istringstream in("learner_id,a,b\nu1,1,0\nghost,0,0\n");
    CHECK_THROWS_WITH_AS(load_learner_category_matrix(in), doctest::Contains("ghost"), ValidationError);
  }

  TEST_CASE("ragged row is a parse error with its line") {
    std::istringstream in("learner_id,a,b\nu1,1,0\nu2,1\n");
    try {
      load_learner_category_matrix(in);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }

  TEST_CASE("bad header") {
    std::istringstream in("id,a\nu1,1\n");
    CHECK_THROWS_AS(load_learner_category_matrix(in), ParseError);
  }

  TEST_CASE("projection examples") {
    CHECK(one_mode_projection(from_rows({{1, 0}, {0, 1}})).entries() == counts({{1, 0}, {0, 1}}));
    CHECK(one_mode_projection(from_rows({{1, 1, 0}, {1, 0, 1}, {0, 1, 1}})).entries() ==
          counts({{2, 1, 1}, {1, 2, 1}, {1, 1, 2}}));
    CHECK(one_mode_projection(from_rows({{1, 1, 1}, {1, 1, 1}})).entries() == counts({{3, 3}, {3, 3}}));
  }

  TEST_CASE("projection matches brute force, is symmetric and bounded by the diagonal") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      std::uniform_int_distribution<std::size_t> sz(1, 40);
      auto c = random_binary(sz(rng), sz(rng), rng);
      auto x = one_mode_projection(wrap(c));
      REQUIRE(x.entries() == oracle::projection(c));
      CHECK(x.kind() == SimilarityKind::projection);
      for (std::size_t i = 0; i < x.n(); ++i) {
        std::int64_t degree = 0;
        for (std::size_t d = 0; d < c.cols(); ++d) degree += c(i, d);
        CHECK(x(i, i) == degree);
        for (std::size_t j = 0; j < x.n(); ++j) {
          CHECK(x(i, j) == x(j, i));
          if (i != j) CHECK(x(i, j) <= std::min(x(i, i), x(j, j)));
        }
      }
    }
  }

  TEST_CASE("projection is equivariant under row permutation") {
    std::mt19937_64 rng(5);
    auto c = random_binary(15, 9, rng);
    std::vector<std::size_t> perm(15);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    BinaryMatrix cp(15, 9);
    for (std::size_t i = 0; i < 15; ++i)
      for (std::size_t d = 0; d < 9; ++d) cp(i, d) = c(perm[i], d);
    auto x = one_mode_projection(wrap(c));
    auto xp = one_mode_projection(wrap(cp));
    for (std::size_t i = 0; i < 15; ++i)
      for (std::size_t j = 0; j < 15; ++j) CHECK(xp(i, j) == x(perm[i], perm[j]));
  }

  TEST_CASE("disjoint supports give a diagonal projection") {
    auto x = one_mode_projection(from_rows({{1, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}));
    CHECK(x.entries() == counts({{2, 0, 0}, {0, 1, 0}, {0, 0, 1}}));
  }

  TEST_CASE("similarity CSV round trip") {
    std::mt19937_64 rng(3);
    auto x = one_mode_projection(wrap(random_binary(12, 6, rng)));
    std::stringstream buf;
    write_similarity_csv(buf, x);
    auto back = load_similarity_matrix(buf);
    CHECK(back == x);
  }

  TEST_CASE("similarity validation") {
    CHECK_THROWS_AS(SimilarityMatrix(counts({{1, 2}, {0, 1}})), ValidationError);
    CHECK_THROWS_AS(SimilarityMatrix(counts({{1, -1}, {-1, 1}})), ValidationError);
    CHECK_THROWS_AS(SimilarityMatrix({"a", "a"}, counts({{1, 0}, {0, 1}})), ValidationError);
    // Counts above the diagonal bound are accepted as plain count data.
    SimilarityMatrix loose(counts({{0, 4}, {4, 0}}));
    CHECK(loose.kind() == SimilarityKind::counts);
  }

  TEST_CASE("similarity CSV with mismatched header ids") {
    std::istringstream in("learner_id,a,b\na,1,0\nc,0,1\n");
    CHECK_THROWS_AS(load_similarity_matrix(in), ValidationError);
  }

  TEST_CASE("principal submatrix and zero diagonal") {
    SimilarityMatrix x({"a", "b", "c"}, counts({{2, 1, 0}, {1, 3, 1}, {0, 1, 1}}));
    auto sub = x.principal_submatrix({2, 0});
    CHECK(sub.learner_ids() == std::vector<std::string>{"c", "a"});
    CHECK(sub.entries() == counts({{1, 0}, {0, 2}}));
    auto z = x.with_zero_diagonal();
    for (std::size_t i = 0; i < 3; ++i) CHECK(z(i, i) == 0);
    CHECK(z(0, 1) == 1);
  }
}
