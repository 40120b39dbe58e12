#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "cdbnmf/bnmf.hpp"
#include "cdbnmf/communities.hpp"
#include "cdbnmf/evaluation.hpp"

namespace cdbnmf {

using Json = nlohmann::ordered_json;

Json to_json(const Hyperparameters& hp);
Hyperparameters hyperparameters_from_json(const Json& j);

Json to_json(const FactorModel& m);
FactorModel factor_model_from_json(const Json& j);

// {k_star, seed, iterations_run, final_data_nll, energy_trace, w, h, beta}
Json to_json(const FitResult& f);
FitResult fit_result_from_json(const Json& j);

Json to_json(const CommunityReport& r);
// learner_id,hard_label,unassigned_flag,p_0..p_{K*-1}
void write_report_csv(std::ostream& out, const CommunityReport& r);

Json to_json(const CommunityProfile& p);

// Pred-0's undefined NLL is written as null.
Json to_json(const EvalReport& r);

// Models as columns, RMSE/NLL as rows; an undefined NLL prints as "-".
void write_report_table(std::ostream& out, const EvalReport& r);

}  // namespace cdbnmf
