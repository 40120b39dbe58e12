#include "cdbnmf/communities.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <istream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include <boost/math/special_functions/gamma.hpp>

#include "cdbnmf/csv.hpp"
#include "cdbnmf/error.hpp"
#include "cdbnmf/random.hpp"

namespace cdbnmf {

std::vector<MembershipProfile> soft_membership(const FactorModel& m,
                                               const std::vector<std::string>& learner_ids) {
  if (m.empty()) throw ContractViolation("soft_membership needs a model with K* >= 1");
  if (!learner_ids.empty() && learner_ids.size() != m.n())
    throw ContractViolation("learner id count does not match the model");

  std::vector<MembershipProfile> out(m.n());
  for (std::size_t i = 0; i < m.n(); ++i) {
    MembershipProfile& p = out[i];
    p.learner_id = learner_ids.empty() ? std::to_string(i) : learner_ids[i];
    auto row = m.w.row(i);
    p.degree_of_participation.assign(row.begin(), row.end());
    const double total = std::accumulate(row.begin(), row.end(), 0.0);
    if (!(total > 0.0)) {
      p.unassigned = true;
      continue;
    }
    p.distribution.resize(row.size());
    for (std::size_t k = 0; k < row.size(); ++k) p.distribution[k] = row[k] / total;
    // max_element returns the first maximum.
    p.hard_label = static_cast<std::size_t>(
        std::max_element(p.distribution.begin(), p.distribution.end()) - p.distribution.begin());
  }
  return out;
}

bool CommunityReport::analysed(const MembershipProfile& p) const {
  return !p.unassigned && p.hard_label < community_sizes.size() &&
         community_sizes[p.hard_label] >= 2;
}

std::vector<std::size_t> CommunityReport::analysed_communities() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < community_sizes.size(); ++k)
    if (community_sizes[k] >= 2) out.push_back(k);
  return out;
}

CommunityReport assign_communities(const FitResult& fit, const std::vector<std::string>& learner_ids) {
  if (fit.empty()) throw NumericalFailure("every community was pruned; nothing to assign");
  CommunityReport report;
  report.assignments = soft_membership(fit.model, learner_ids);
  report.k_star = fit.k_star;
  report.best_seed = fit.seed;
  report.best_data_nll = fit.final_data_nll;
  report.restarts_used = 1;

  std::vector<std::size_t> counts(fit.k_star, 0);
  for (const auto& p : report.assignments)
    if (!p.unassigned) ++counts[p.hard_label];
  for (const auto& p : report.assignments)
    if (!p.unassigned && counts[p.hard_label] < 2) report.filtered_singletons.push_back(p.learner_id);
  report.community_sizes.resize(fit.k_star, 0);
  for (std::size_t k = 0; k < fit.k_star; ++k) report.community_sizes[k] = counts[k] >= 2 ? counts[k] : 0;
  return report;
}

std::optional<std::size_t> select_best_restart(const std::vector<RestartOutcome>& outcomes) {
  std::optional<std::size_t> best;
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    if (outcomes[r].k_star == 0) continue;
    if (!best || outcomes[r].data_nll < outcomes[*best].data_nll) best = r;
  }
  return best;
}

CommunityReport best_of_restarts(const SimilarityMatrix& x, const Hyperparameters& hp,
                                 std::size_t n_restarts, std::uint64_t seed,
                                 std::vector<RestartOutcome>* outcomes) {
  require(n_restarts >= 1, "n_restarts must be >= 1");
  hp.validate();

  std::vector<RestartOutcome> all(n_restarts);
  // Each thread keeps its own best; (nll, index) is a total order, so the
  // merged winner does not depend on scheduling.
  std::optional<FitResult> best_fit;
  std::size_t best_index = 0;
  std::exception_ptr failure;

#pragma omp parallel
  {
    std::optional<FitResult> local_fit;
    std::size_t local_index = 0;
#pragma omp for schedule(dynamic, 1)
    for (std::ptrdiff_t sr = 0; sr < static_cast<std::ptrdiff_t>(n_restarts); ++sr) {
      const auto r = static_cast<std::size_t>(sr);
      try {
        FitResult f = fit(x, hp, derive_seed(seed, r));
        all[r] = {f.seed, f.final_data_nll, f.k_star};
        if (f.empty()) continue;
        if (!local_fit || f.final_data_nll < local_fit->final_data_nll ||
            (f.final_data_nll == local_fit->final_data_nll && r < local_index)) {
          local_fit = std::move(f);
          local_index = r;
        }
      } catch (...) {
#pragma omp critical(cdbnmf_restart_failure)
        if (!failure) failure = std::current_exception();
      }
    }
#pragma omp critical(cdbnmf_restart_merge)
    if (local_fit) {
      if (!best_fit || local_fit->final_data_nll < best_fit->final_data_nll ||
          (local_fit->final_data_nll == best_fit->final_data_nll && local_index < best_index)) {
        best_fit = std::move(local_fit);
        best_index = local_index;
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
  if (outcomes) *outcomes = all;
  if (!best_fit) throw NumericalFailure("all " + std::to_string(n_restarts) + " restarts produced empty models");

  CommunityReport report = assign_communities(*best_fit, x.learner_ids());
  report.restarts_used = n_restarts;
  return report;
}

double chi_square_survival(double x, double dof) {
  require(dof > 0.0, "chi-square survival needs dof > 0");
  if (!(x > 0.0)) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

KruskalWallisResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  require(groups.size() >= 2, "kruskal_wallis needs at least 2 groups");
  std::size_t n = 0;
  for (const auto& g : groups) {
    require(!g.empty(), "kruskal_wallis groups must be non-empty");
    n += g.size();
  }
  require(n >= 3, "kruskal_wallis needs at least 3 observations");

  struct Obs {
    double value;
    std::size_t group;
  };
  std::vector<Obs> pooled;
  pooled.reserve(n);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (double v : groups[g]) pooled.push_back({v, g});
  std::sort(pooled.begin(), pooled.end(), [](const Obs& a, const Obs& b) { return a.value < b.value; });

  std::vector<double> rank_sum(groups.size(), 0.0);
  double tie_term = 0.0;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start + 1;
    while (end < n && pooled[end].value == pooled[start].value) ++end;
    const double midrank = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t t = start; t < end; ++t) rank_sum[pooled[t].group] += midrank;
    const double t = static_cast<double>(end - start);
    tie_term += t * t * t - t;
    start = end;
  }

  const double nd = static_cast<double>(n);
  KruskalWallisResult res;
  res.dof = groups.size() - 1;
  const double correction = 1.0 - tie_term / (nd * nd * nd - nd);
  if (correction <= 0.0) return res;  // every value tied: no evidence of a difference

  double s = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g)
    s += rank_sum[g] * rank_sum[g] / static_cast<double>(groups[g].size());
  const double h = (12.0 / (nd * (nd + 1.0)) * s - 3.0 * (nd + 1.0)) / correction;
  res.h_statistic = std::max(h, 0.0);
  res.p_value = chi_square_survival(res.h_statistic, static_cast<double>(res.dof));
  return res;
}

double adjusted_rand_index(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  require(a.size() == b.size(), "adjusted_rand_index needs equal-length labelings");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  std::map<std::size_t, double> ra, rb;
  for (std::size_t i = 0; i < n; ++i) {
    joint[{a[i], b[i]}] += 1.0;
    ra[a[i]] += 1.0;
    rb[b[i]] += 1.0;
  }
  auto pairs = [](double c) { return 0.5 * c * (c - 1.0); };
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [_, c] : joint) index += pairs(c);
  for (const auto& [_, c] : ra) sum_a += pairs(c);
  for (const auto& [_, c] : rb) sum_b += pairs(c);
  const double expected = sum_a * sum_b / pairs(static_cast<double>(n));
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // both labelings trivial and identical in shape
  return (index - expected) / (max_index - expected);
}

std::vector<std::size_t> hard_labels(const CommunityReport& report, std::size_t missing) {
  std::vector<std::size_t> out;
  out.reserve(report.assignments.size());
  for (const auto& p : report.assignments) out.push_back(report.analysed(p) ? p.hard_label : missing);
  return out;
}

namespace {

std::string trim(const std::string& s) {
  auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t") - first + 1);
}

std::optional<double> parse_real(const std::string& cell) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

AttributeTable load_attribute_table(std::istream& in) {
  auto records = csv::read(in);
  if (records.empty()) throw ParseError(1, "empty attribute table");
  AttributeTable t;
  const auto& header = records.front();
  if (header.fields.empty() || trim(header.fields[0]) != "learner_id")
    throw ParseError(header.line, "first header column must be 'learner_id'");
  for (std::size_t c = 1; c < header.fields.size(); ++c) t.columns.push_back(trim(header.fields[c]));

  std::unordered_set<std::string> seen;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.fields.size())
      throw ParseError(rec.line, "expected " + std::to_string(header.fields.size()) + " fields");
    auto id = trim(rec.fields[0]);
    if (!seen.insert(id).second) throw ValidationError("duplicate learner id '" + id + "' in attributes");
    t.learner_ids.push_back(id);
    std::vector<std::string> row;
    for (std::size_t c = 1; c < rec.fields.size(); ++c) row.push_back(trim(rec.fields[c]));
    t.cells.push_back(std::move(row));
  }
  return t;
}

CommunityProfile group_crosstab(const CommunityReport& report, const AttributeTable& attributes) {
  CommunityProfile prof;
  prof.communities = report.analysed_communities();
  std::unordered_map<std::size_t, std::size_t> slot;  // community -> position
  for (std::size_t s = 0; s < prof.communities.size(); ++s) slot[prof.communities[s]] = s;

  std::unordered_map<std::string, std::size_t> community_of;
  for (const auto& p : report.assignments)
    if (report.analysed(p)) community_of[p.learner_id] = slot.at(p.hard_label);

  // Joined rows: (attribute row, community slot)
  std::vector<std::pair<std::size_t, std::size_t>> joined;
  for (std::size_t r = 0; r < attributes.learner_ids.size(); ++r) {
    auto it = community_of.find(attributes.learner_ids[r]);
    if (it == community_of.end()) {
      ++prof.skipped_count;
      continue;
    }
    joined.emplace_back(r, it->second);
  }
  if (joined.empty())
    throw ValidationError("no attribute row matches an analysed learner");

  const std::size_t groups = prof.communities.size();
  prof.members.assign(groups, 0);
  for (const auto& [_, s] : joined) ++prof.members[s];

  for (std::size_t c = 0; c < attributes.columns.size(); ++c) {
    bool numeric = true;
    bool any = false;
    for (const auto& [r, _] : joined) {
      const auto& cell = attributes.cells[r][c];
      if (cell.empty()) continue;
      any = true;
      if (!parse_real(cell)) {
        numeric = false;
        break;
      }
    }
    if (numeric && any) {
      RealSummary sum{attributes.columns[c], std::vector<std::optional<double>>(groups), std::nullopt};
      std::vector<std::vector<double>> values(groups);
      for (const auto& [r, s] : joined) {
        const auto& cell = attributes.cells[r][c];
        if (!cell.empty()) values[s].push_back(*parse_real(cell));
      }
      std::vector<std::vector<double>> nonempty;
      std::size_t total = 0;
      for (std::size_t s = 0; s < groups; ++s) {
        if (values[s].empty()) continue;
        sum.means[s] = std::accumulate(values[s].begin(), values[s].end(), 0.0) /
                       static_cast<double>(values[s].size());
        total += values[s].size();
        nonempty.push_back(values[s]);
      }
      if (nonempty.size() >= 2 && total >= 3) sum.test = kruskal_wallis(nonempty);
      prof.real.push_back(std::move(sum));
    } else {
      CategoricalSummary sum{attributes.columns[c], std::vector<std::map<std::string, std::size_t>>(groups),
                             std::vector<std::map<std::string, double>>(groups)};
      std::vector<std::size_t> present(groups, 0);
      for (const auto& [r, s] : joined) {
        const auto& cell = attributes.cells[r][c];
        if (cell.empty()) continue;
        ++sum.counts[s][cell];
        ++present[s];
      }
      for (std::size_t s = 0; s < groups; ++s)
        for (const auto& [level, count] : sum.counts[s])
          sum.proportions[s][level] = static_cast<double>(count) / static_cast<double>(present[s]);
      prof.categorical.push_back(std::move(sum));
    }
  }
  return prof;
}

}  // namespace cdbnmf
