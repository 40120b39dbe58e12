#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cdbnmf/matrix.hpp"

namespace cdbnmf {

// Binary learner x content-category matrix. Entry (n, d) is 1 when learner n
// made at least one post labelled with category d.
class LearnerCategoryMatrix {
 public:
  // Validates: entries binary, ids unique, no all-zero row.
  LearnerCategoryMatrix(std::vector<std::string> learner_ids,
                        std::vector<std::string> category_ids, BinaryMatrix entries);

  std::size_t n_learners() const noexcept { return entries_.rows(); }
  std::size_t n_categories() const noexcept { return entries_.cols(); }
  const BinaryMatrix& entries() const noexcept { return entries_; }
  const std::vector<std::string>& learner_ids() const noexcept { return learner_ids_; }
  const std::vector<std::string>& category_ids() const noexcept { return category_ids_; }

 private:
  std::vector<std::string> learner_ids_;
  std::vector<std::string> category_ids_;
  BinaryMatrix entries_;
};

// Which invariants a SimilarityMatrix was checked against.
//   projection: produced from (or consistent with) shared-category counts;
//               0 <= x_ij <= min(x_ii, x_jj).
//   counts:     any symmetric nonnegative integer matrix (synthetic Poisson
//               draws, zeroed diagonal, subsets fed to the benchmark).
enum class SimilarityKind { projection, counts };

class SimilarityMatrix {
 public:
  // Validates square shape, id count, uniqueness, symmetry and nonnegativity.
  // The kind is inferred: projection when the diagonal bound holds everywhere.
  SimilarityMatrix(std::vector<std::string> learner_ids, CountMatrix entries);

  // Unlabelled convenience constructor; ids become "0", "1", ...
  explicit SimilarityMatrix(CountMatrix entries);

  std::size_t n() const noexcept { return entries_.rows(); }
  std::int64_t operator()(std::size_t i, std::size_t j) const noexcept { return entries_(i, j); }
  const CountMatrix& entries() const noexcept { return entries_; }
  const std::vector<std::string>& learner_ids() const noexcept { return learner_ids_; }
  SimilarityKind kind() const noexcept { return kind_; }

  // Principal submatrix on the given rows (and matching columns), in order.
  SimilarityMatrix principal_submatrix(const std::vector<std::size_t>& index) const;

  SimilarityMatrix with_zero_diagonal() const;

  friend bool operator==(const SimilarityMatrix& a, const SimilarityMatrix& b) {
    return a.entries_ == b.entries_ && a.learner_ids_ == b.learner_ids_;
  }

 private:
  std::vector<std::string> learner_ids_;
  CountMatrix entries_;
  SimilarityKind kind_ = SimilarityKind::counts;
};

enum class TableFormat { csv };

// Header-bearing CSV: `learner_id,<category ids...>` then one row per learner
// with literal 0/1 cells.
LearnerCategoryMatrix load_learner_category_matrix(std::istream& source,
                                                   TableFormat format = TableFormat::csv);

// x_ij = sum_d c_id * c_jd. The diagonal is kept (x_ii = learner degree).
SimilarityMatrix one_mode_projection(const LearnerCategoryMatrix& c);

// `learner_id,<learner ids...>` header, decimal integer cells.
void write_similarity_csv(std::ostream& out, const SimilarityMatrix& x);
SimilarityMatrix load_similarity_matrix(std::istream& source);

}  // namespace cdbnmf
