#include "cdbnmf/forum_data.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "cdbnmf/csv.hpp"
#include "cdbnmf/error.hpp"

namespace cdbnmf {
namespace {

std::string trim(const std::string& s) {
  auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

void check_unique(const std::vector<std::string>& ids, const char* what) {
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second)
      throw ValidationError(std::string("duplicate ") + what + " id '" + id + "'");
  }
}

// Header row plus the ids of the data rows; shared by both CSV readers.
struct Table {
  std::vector<std::string> header;
  std::vector<csv::Record> rows;
};

Table read_table(std::istream& source) {
  auto records = csv::read(source);
  if (records.empty()) throw ParseError(1, "empty input, expected a header row");
  Table t;
  t.header = records.front().fields;
  for (auto& h : t.header) h = trim(h);
  if (t.header.empty() || t.header.front() != "learner_id")
    throw ParseError(records.front().line, "first header column must be 'learner_id'");
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].fields.size() != t.header.size())
      throw ParseError(records[r].line, "expected " + std::to_string(t.header.size()) +
                                            " fields, found " +
                                            std::to_string(records[r].fields.size()));
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

}  // namespace

LearnerCategoryMatrix::LearnerCategoryMatrix(std::vector<std::string> learner_ids,
                                             std::vector<std::string> category_ids,
                                             BinaryMatrix entries)
    : learner_ids_(std::move(learner_ids)),
      category_ids_(std::move(category_ids)),
      entries_(std::move(entries)) {
  if (learner_ids_.size() != entries_.rows() || category_ids_.size() != entries_.cols())
    throw ContractViolation("id counts do not match the matrix shape");
  check_unique(learner_ids_, "learner");
  check_unique(category_ids_, "category");
  for (std::size_t n = 0; n < entries_.rows(); ++n) {
    bool any = false;
    for (auto v : entries_.row(n)) {
      if (v > 1) throw ValidationError("non-binary entry for learner '" + learner_ids_[n] + "'");
      any = any || v == 1;
    }
    if (!any) throw ValidationError("learner '" + learner_ids_[n] + "' has no labelled category");
  }
}

SimilarityMatrix::SimilarityMatrix(std::vector<std::string> learner_ids, CountMatrix entries)
    : learner_ids_(std::move(learner_ids)), entries_(std::move(entries)) {
  const std::size_t n = entries_.rows();
  if (entries_.cols() != n) throw ContractViolation("similarity matrix must be square");
  if (learner_ids_.size() != n) throw ContractViolation("learner id count does not match N");
  check_unique(learner_ids_, "learner");

  bool bounded = true;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      auto v = entries_(i, j);
      if (v < 0) throw ValidationError("negative similarity at (" + learner_ids_[i] + ", " +
                                       learner_ids_[j] + ")");
      if (v != entries_(j, i))
        throw ValidationError("similarity matrix is not symmetric at (" + learner_ids_[i] +
                              ", " + learner_ids_[j] + ")");
      if (i != j && (v > entries_(i, i) || v > entries_(j, j))) bounded = false;
    }
  }
  kind_ = bounded ? SimilarityKind::projection : SimilarityKind::counts;
}

SimilarityMatrix::SimilarityMatrix(CountMatrix entries)
    : SimilarityMatrix(
          [&] {
            std::vector<std::string> ids(entries.rows());
            for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = std::to_string(i);
            return ids;
          }(),
          std::move(entries)) {}

SimilarityMatrix SimilarityMatrix::principal_submatrix(const std::vector<std::size_t>& index) const {
  CountMatrix sub(index.size(), index.size());
  std::vector<std::string> ids;
  ids.reserve(index.size());
  for (std::size_t a = 0; a < index.size(); ++a) {
    if (index[a] >= n()) throw ContractViolation("submatrix index out of range");
    ids.push_back(learner_ids_[index[a]]);
    for (std::size_t b = 0; b < index.size(); ++b) sub(a, b) = entries_(index[a], index[b]);
  }
  return SimilarityMatrix(std::move(ids), std::move(sub));
}

SimilarityMatrix SimilarityMatrix::with_zero_diagonal() const {
  CountMatrix copy = entries_;
  for (std::size_t i = 0; i < n(); ++i) copy(i, i) = 0;
  return SimilarityMatrix(learner_ids_, std::move(copy));
}

LearnerCategoryMatrix load_learner_category_matrix(std::istream& source, TableFormat format) {
  if (format != TableFormat::csv) throw ContractViolation("unsupported table format");
  Table t = read_table(source);
  std::vector<std::string> categories(t.header.begin() + 1, t.header.end());
  if (categories.empty()) throw ParseError(1, "no category columns in header");

  BinaryMatrix entries(t.rows.size(), categories.size());
  std::vector<std::string> learners;
  learners.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& rec = t.rows[r];
    learners.push_back(trim(rec.fields[0]));
    for (std::size_t d = 0; d < categories.size(); ++d) {
      auto cell = trim(rec.fields[d + 1]);
      if (cell == "0") {
        entries(r, d) = 0;
      } else if (cell == "1") {
        entries(r, d) = 1;
      } else {
        throw ValidationError("line " + std::to_string(rec.line) + ": non-binary cell '" + cell +
                              "' in column '" + categories[d] + "'");
      }
    }
  }
  return LearnerCategoryMatrix(std::move(learners), std::move(categories), std::move(entries));
}

SimilarityMatrix one_mode_projection(const LearnerCategoryMatrix& c) {
  const auto& e = c.entries();
  const std::size_t n = c.n_learners();
  const std::size_t d = c.n_categories();
  CountMatrix x(n, n);
  // Upper triangle then mirror; rows are independent.
#pragma omp parallel for schedule(dynamic, 16) if (n * n * d > (1u << 16))
  for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(n); ++si) {
    const auto i = static_cast<std::size_t>(si);
    auto ri = e.row(i);
    for (std::size_t j = i; j < n; ++j) {
      auto rj = e.row(j);
      std::int64_t shared = 0;
      for (std::size_t k = 0; k < d; ++k) shared += ri[k] & rj[k];
      x(i, j) = shared;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) x(i, j) = x(j, i);
  return SimilarityMatrix(c.learner_ids(), std::move(x));
}

void write_similarity_csv(std::ostream& out, const SimilarityMatrix& x) {
  out << "learner_id";
  for (const auto& id : x.learner_ids()) out << ',' << csv::escape(id);
  out << '\n';
  for (std::size_t i = 0; i < x.n(); ++i) {
    out << csv::escape(x.learner_ids()[i]);
    for (std::size_t j = 0; j < x.n(); ++j) out << ',' << x(i, j);
    out << '\n';
  }
}

SimilarityMatrix load_similarity_matrix(std::istream& source) {
  Table t = read_table(source);
  std::vector<std::string> column_ids(t.header.begin() + 1, t.header.end());
  const std::size_t n = column_ids.size();
  if (t.rows.size() != n)
    throw ParseError(t.rows.empty() ? 1 : t.rows.back().line,
                     "expected " + std::to_string(n) + " rows for a square matrix, found " +
                         std::to_string(t.rows.size()));
  CountMatrix x(n, n);
  std::vector<std::string> row_ids;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& rec = t.rows[i];
    row_ids.push_back(trim(rec.fields[0]));
    if (row_ids.back() != column_ids[i])
      throw ValidationError("line " + std::to_string(rec.line) + ": row id '" + row_ids.back() +
                            "' does not match column id '" + column_ids[i] + "'");
    for (std::size_t j = 0; j < n; ++j) {
      auto cell = trim(rec.fields[j + 1]);
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || ptr != cell.data() + cell.size())
        throw ParseError(rec.line, "non-integer cell '" + cell + "'");
      x(i, j) = v;
    }
  }
  return SimilarityMatrix(std::move(row_ids), std::move(x));
}

}  // namespace cdbnmf
