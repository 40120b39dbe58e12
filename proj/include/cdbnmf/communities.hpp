#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cdbnmf/bnmf.hpp"
#include "cdbnmf/forum_data.hpp"

namespace cdbnmf {

// A learner's normalized row of W. Rows of W that are all zero cannot be
// normalized; they are flagged unassigned and carry an empty distribution.
struct MembershipProfile {
  std::string learner_id;
  std::vector<double> distribution;             // sums to 1 when assigned
  std::size_t hard_label = 0;                   // argmax, lowest index on ties
  std::vector<double> degree_of_participation;  // raw W row
  bool unassigned = false;
};

// Per-learner soft memberships from a pruned model. learner_ids may be empty,
// in which case rows are named "0", "1", ...
std::vector<MembershipProfile> soft_membership(const FactorModel& m,
                                               const std::vector<std::string>& learner_ids = {});

struct CommunityReport {
  std::vector<MembershipProfile> assignments;
  // Indexed by community. Communities with fewer than two members are
  // reported with size 0 and their members listed in filtered_singletons.
  std::vector<std::size_t> community_sizes;
  std::vector<std::string> filtered_singletons;
  std::size_t restarts_used = 0;
  std::uint64_t best_seed = 0;
  double best_data_nll = 0.0;
  std::size_t k_star = 0;

  // A learner counts toward analysis when assigned and not filtered.
  bool analysed(const MembershipProfile& p) const;
  std::vector<std::size_t> analysed_communities() const;
};

// Builds the report for one fitted model: soft memberships, sizes, singleton
// filtering. Throws NumericalFailure on an empty model.
CommunityReport assign_communities(const FitResult& fit, const std::vector<std::string>& learner_ids);

struct RestartOutcome {
  std::uint64_t seed = 0;
  double data_nll = 0.0;
  std::size_t k_star = 0;
};

// Index of the restart with the smallest data NLL among non-empty ones, first
// index on ties; nullopt when every restart is empty.
std::optional<std::size_t> select_best_restart(const std::vector<RestartOutcome>& outcomes);

// Runs n_restarts fits with seeds derive_seed(seed, r), keeps the one with the
// highest data likelihood (Poisson term only) and assigns communities from it.
// Restarts run concurrently; the reduction is ordered by restart index.
CommunityReport best_of_restarts(const SimilarityMatrix& x, const Hyperparameters& hp,
                                 std::size_t n_restarts, std::uint64_t seed,
                                 std::vector<RestartOutcome>* outcomes = nullptr);

// Kruskal-Wallis H with midrank tie correction and its chi-square p-value on
// (#groups - 1) degrees of freedom.
struct KruskalWallisResult {
  double h_statistic = 0.0;
  double p_value = 1.0;
  std::size_t dof = 0;
};

KruskalWallisResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

// Upper tail P[chi2_dof > x].
double chi_square_survival(double x, double dof);

// Chance-corrected agreement between two labelings of the same items.
double adjusted_rand_index(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b);

// Hard labels of a report (unassigned and filtered learners get `missing`).
std::vector<std::size_t> hard_labels(const CommunityReport& report,
                                     std::size_t missing = static_cast<std::size_t>(-1));

// ---- attribute profiling -------------------------------------------------

// Columns of an attribute table. A column is real when every non-empty cell
// parses as a number, categorical otherwise. Empty cells are missing.
struct AttributeTable {
  std::vector<std::string> learner_ids;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> cells;  // [row][column]
};

AttributeTable load_attribute_table(std::istream& in);

struct CategoricalSummary {
  std::string attribute;
  // per community: level -> count, and level -> proportion of non-missing
  std::vector<std::map<std::string, std::size_t>> counts;
  std::vector<std::map<std::string, double>> proportions;
};

struct RealSummary {
  std::string attribute;
  std::vector<std::optional<double>> means;  // per community; nullopt if no values
  std::optional<KruskalWallisResult> test;   // nullopt when fewer than 2 groups have data
};

struct CommunityProfile {
  std::vector<std::size_t> communities;  // analysed community indices, ascending
  std::vector<std::size_t> members;      // per community: learners joined with attributes
  std::vector<CategoricalSummary> categorical;
  std::vector<RealSummary> real;
  std::size_t skipped_count = 0;  // attribute rows whose learner is not analysed
};

CommunityProfile group_crosstab(const CommunityReport& report, const AttributeTable& attributes);

}  // namespace cdbnmf
