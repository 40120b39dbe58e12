#include "cdbnmf/serialize.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>

#include "cdbnmf/csv.hpp"
#include "cdbnmf/error.hpp"

namespace cdbnmf {
namespace {

Json matrix_json(const RealMatrix& m) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    rows.push_back(Json(std::vector<double>(r.begin(), r.end())));
  }
  return rows;
}

RealMatrix matrix_from_json(const Json& j, std::size_t cols_if_empty) {
  const std::size_t rows = j.size();
  const std::size_t cols = rows ? j.at(0).size() : cols_if_empty;
  RealMatrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (j.at(i).size() != cols) throw ValidationError("ragged matrix in JSON");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  }
  return m;
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json to_json(const Hyperparameters& hp) {
  Json j;
  j["a"] = hp.a;
  j["b"] = hp.b;
  j["k0"] = hp.k0 ? Json(*hp.k0) : Json(nullptr);
  j["n_iter"] = hp.n_iter;
  j["rel_tol"] = hp.rel_tol;
  j["eps"] = hp.eps;
  j["prune_tol"] = hp.prune_tol;
  return j;
}

Hyperparameters hyperparameters_from_json(const Json& j) {
  Hyperparameters hp;
  hp.a = j.value("a", hp.a);
  hp.b = j.value("b", hp.b);
  if (j.contains("k0") && !j["k0"].is_null()) hp.k0 = j["k0"].get<std::int64_t>();
  hp.n_iter = j.value("n_iter", hp.n_iter);
  hp.rel_tol = j.value("rel_tol", hp.rel_tol);
  hp.eps = j.value("eps", hp.eps);
  hp.prune_tol = j.value("prune_tol", hp.prune_tol);
  return hp;
}

Json to_json(const FactorModel& m) {
  Json j;
  j["w"] = matrix_json(m.w);
  j["h"] = matrix_json(m.h);
  j["beta"] = m.beta;
  return j;
}

FactorModel factor_model_from_json(const Json& j) {
  FactorModel m;
  m.beta = j.at("beta").get<std::vector<double>>();
  m.w = matrix_from_json(j.at("w"), m.beta.size());
  // An empty model still has N columns in h; recover N from w.
  m.h = matrix_from_json(j.at("h"), m.w.rows());
  m.validate();
  return m;
}

Json to_json(const FitResult& f) {
  Json j;
  j["k_star"] = f.k_star;
  j["seed"] = f.seed;
  j["iterations_run"] = f.iterations_run;
  j["final_data_nll"] = f.final_data_nll;
  j["energy_trace"] = f.energy_trace;
  j["w"] = matrix_json(f.model.w);
  j["h"] = matrix_json(f.model.h);
  j["beta"] = f.model.beta;
  return j;
}

FitResult fit_result_from_json(const Json& j) {
  try {
    FitResult f;
    f.k_star = j.at("k_star").get<std::size_t>();
    f.seed = j.at("seed").get<std::uint64_t>();
    f.iterations_run = j.at("iterations_run").get<std::size_t>();
    f.final_data_nll = j.at("final_data_nll").get<double>();
    f.energy_trace = j.at("energy_trace").get<std::vector<double>>();
    f.model = factor_model_from_json(j);
    if (f.model.k() != f.k_star) throw ValidationError("k_star does not match the factor shapes");
    return f;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed fit JSON: ") + e.what());
  } catch (const ContractViolation& e) {
    throw ValidationError(std::string("inconsistent fit JSON: ") + e.what());
  }
}

Json to_json(const CommunityReport& r) {
  Json j;
  j["k_star"] = r.k_star;
  j["restarts_used"] = r.restarts_used;
  j["best_seed"] = r.best_seed;
  j["best_data_nll"] = r.best_data_nll;
  j["community_sizes"] = r.community_sizes;
  j["filtered_singletons"] = r.filtered_singletons;
  Json rows = Json::array();
  for (const auto& p : r.assignments) {
    Json a;
    a["learner_id"] = p.learner_id;
    a["unassigned"] = p.unassigned;
    a["hard_label"] = p.unassigned ? Json(nullptr) : Json(p.hard_label);
    a["analysed"] = r.analysed(p);
    a["distribution"] = p.distribution;
    a["degree_of_participation"] = p.degree_of_participation;
    rows.push_back(std::move(a));
  }
  j["assignments"] = std::move(rows);
  return j;
}

void write_report_csv(std::ostream& out, const CommunityReport& r) {
  out << "learner_id,hard_label,unassigned_flag";
  for (std::size_t k = 0; k < r.k_star; ++k) out << ",p_" << k;
  out << '\n';
  std::ostringstream cell;
  cell << std::setprecision(17);
  for (const auto& p : r.assignments) {
    out << csv::escape(p.learner_id) << ',';
    if (!p.unassigned) out << p.hard_label;
    out << ',' << (p.unassigned ? 1 : 0);
    for (std::size_t k = 0; k < r.k_star; ++k) {
      out << ',';
      if (!p.unassigned) {
        cell.str("");
        cell << p.distribution[k];
        out << cell.str();
      }
    }
    out << '\n';
  }
}

Json to_json(const CommunityProfile& p) {
  Json j;
  j["communities"] = p.communities;
  j["members"] = p.members;
  j["skipped_count"] = p.skipped_count;
  Json cat = Json::array();
  for (const auto& c : p.categorical) {
    Json a;
    a["attribute"] = c.attribute;
    Json per = Json::array();
    for (std::size_t s = 0; s < p.communities.size(); ++s) {
      Json e;
      e["community"] = p.communities[s];
      e["counts"] = c.counts[s];
      e["proportions"] = c.proportions[s];
      per.push_back(std::move(e));
    }
    a["per_community"] = std::move(per);
    cat.push_back(std::move(a));
  }
  j["categorical"] = std::move(cat);
  Json real = Json::array();
  for (const auto& r : p.real) {
    Json a;
    a["attribute"] = r.attribute;
    Json means = Json::array();
    for (const auto& m : r.means) means.push_back(optional_json(m));
    a["means"] = std::move(means);
    if (r.test) {
      a["kruskal_wallis"] = {{"h_statistic", r.test->h_statistic},
                             {"p_value", r.test->p_value},
                             {"dof", r.test->dof}};
    } else {
      a["kruskal_wallis"] = nullptr;
    }
    real.push_back(std::move(a));
  }
  j["real"] = std::move(real);
  return j;
}

Json to_json(const EvalReport& r) {
  Json j;
  j["n_subsets"] = r.n_subsets;
  j["subset_size"] = r.subset_size;
  j["fraction"] = r.fraction;
  j["seed"] = r.seed;
  Json models = Json::array();
  for (const auto& m : r.models) {
    Json e;
    e["model"] = m.model_name;
    e["rmse"] = m.rmse;
    e["nll"] = optional_json(m.nll);
    e["subset_rmse"] = m.subset_rmse;
    Json nlls = Json::array();
    for (const auto& v : m.subset_nll) nlls.push_back(optional_json(v));
    e["subset_nll"] = std::move(nlls);
    models.push_back(std::move(e));
  }
  j["models"] = std::move(models);
  return j;
}

void write_report_table(std::ostream& out, const EvalReport& r) {
  constexpr int kLabel = 6;
  constexpr int kCol = 12;
  auto fmt = [](double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
  };
  out << std::left << std::setw(kLabel) << "";
  for (const auto& m : r.models) out << std::right << std::setw(kCol) << m.model_name;
  out << '\n';
  out << std::left << std::setw(kLabel) << "RMSE";
  for (const auto& m : r.models) out << std::right << std::setw(kCol) << fmt(m.rmse, 4);
  out << '\n';
  out << std::left << std::setw(kLabel) << "NLL";
  for (const auto& m : r.models) out << std::right << std::setw(kCol) << (m.nll ? fmt(*m.nll, 2) : "-");
  out << '\n';
}

}  // namespace cdbnmf
