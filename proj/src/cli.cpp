#include "cdbnmf/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cdbnmf/communities.hpp"
#include "cdbnmf/csv.hpp"
#include "cdbnmf/error.hpp"
#include "cdbnmf/evaluation.hpp"
#include "cdbnmf/forum_data.hpp"
#include "cdbnmf/synthetic.hpp"

#ifndef CDBNMF_VERSION
#define CDBNMF_VERSION "0.0.0"
#endif

namespace cdbnmf::cli {
namespace {

constexpr const char* kCommands[] = {"project", "fit", "assign", "benchmark", "synth"};

std::ifstream open_input(const std::string& path) {
  if (path.empty()) throw ContractViolation("an input path (--in) is required");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << contents;
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

void write_json(const std::string& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

SimilarityMatrix load_x(const RunConfig& c) {
  auto in = open_input(c.input);
  SimilarityMatrix x = load_similarity_matrix(in);
  return c.zero_diagonal ? x.with_zero_diagonal() : x;
}

FitResult load_fit(const std::string& path) {
  auto in = open_input(path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
  return fit_result_from_json(j);
}

void run_project(const RunConfig& c, const Json& man, std::ostream& log) {
  auto in = open_input(c.input);
  SimilarityMatrix x = one_mode_projection(load_learner_category_matrix(in));
  std::ostringstream body;
  write_similarity_csv(body, x);
  write_file(c.output, body.str());
  log << "projected " << x.n() << " learners\n";
  (void)man;
}

void run_fit(const RunConfig& c, const Json& man, std::ostream& log) {
  FitResult f = fit(load_x(c), c.hp, c.seed);
  Json j = to_json(f);
  j["manifest"] = man;
  write_json(c.output, j);
  log << "k_star=" << f.k_star << " iterations=" << f.iterations_run
      << " data_nll=" << f.final_data_nll << '\n';
}

void run_assign(const RunConfig& c, const Json& man, std::ostream& log) {
  SimilarityMatrix x = load_x(c);
  CommunityReport report;
  if (!c.fit_path.empty()) {
    FitResult f = load_fit(c.fit_path);
    if (f.model.n() != x.n()) throw ValidationError("saved fit does not match the size of the input matrix");
    report = assign_communities(f, x.learner_ids());
  } else {
    report = best_of_restarts(x, c.hp, c.n_restarts, c.seed);
  }
  Json j = to_json(report);
  j["manifest"] = man;
  write_json(c.output, j);

  std::ostringstream flat;
  write_report_csv(flat, report);
  write_file(c.output + ".csv", flat.str());

  if (!c.attributes.empty()) {
    auto in = open_input(c.attributes);
    CommunityProfile profile = group_crosstab(report, load_attribute_table(in));
    Json p = to_json(profile);
    p["manifest"] = man;
    write_json(c.output + ".profile.json", p);
  }
  log << "k_star=" << report.k_star << " best_seed=" << report.best_seed
      << " singletons=" << report.filtered_singletons.size() << '\n';
}

void run_benchmark(const RunConfig& c, const Json& man, std::ostream& log) {
  BenchmarkOptions opts;
  opts.n_subsets = c.n_subsets;
  opts.subset_size = c.subset_size;
  opts.fraction = c.fraction;
  opts.symmetric_mask = c.symmetric_mask;
  EvalReport report = benchmark(load_x(c), opts, c.hp, c.seed);
  Json j = to_json(report);
  j["manifest"] = man;
  write_json(c.output, j);
  std::ostringstream table;
  write_report_table(table, report);
  write_file(c.output + ".txt", table.str());
  log << table.str();
}

void run_synth(const RunConfig& c, const Json& man, std::ostream& log) {
  std::ostringstream body;
  if (c.synth_mode == SynthMode::planted) {
    PlantedSample s = sample_planted(
        PlantedSpec::balanced(c.synth_n, c.synth_k, c.within_rate, c.between_rate, c.seed));
    write_similarity_csv(body, s.x);
    std::ostringstream labels;
    labels << "learner_id,label\n";
    for (std::size_t i = 0; i < s.labels.size(); ++i)
      labels << csv::escape(s.x.learner_ids()[i]) << ',' << s.labels[i] << '\n';
    write_file(c.output + ".labels.csv", labels.str());
  } else {
    GenerativeSample s = sample_generative(c.synth_n, c.synth_k, c.hp, c.seed);
    write_similarity_csv(body, s.x);
    Json truth = to_json(s.model);
    truth["manifest"] = man;
    write_json(c.output + ".truth.json", truth);
  }
  write_file(c.output, body.str());
  log << "wrote " << c.synth_n << "x" << c.synth_n << " matrix\n";
}

}  // namespace

std::string to_string(Command c) { return kCommands[static_cast<int>(c)]; }

Command command_from_string(const std::string& s) {
  for (int i = 0; i < 5; ++i)
    if (s == kCommands[i]) return static_cast<Command>(i);
  throw ContractViolation("unknown command '" + s + "'");
}

void RunConfig::validate() const {
  hp.validate();
  require(!output.empty(), "an output path (--out) is required");
  require(command == Command::synth || !input.empty(), "an input path (--in) is required");
  require(n_restarts >= 1, "--restarts must be >= 1");
  require(fraction > 0.0 && fraction < 1.0, "--fraction must lie in (0, 1)");
  require(n_subsets >= 1, "--subsets must be >= 1");
  require(subset_size >= 1, "--subset-size must be >= 1");
  if (command == Command::synth) {
    require(synth_n >= 1 && synth_k >= 1 && synth_k <= synth_n, "synth needs 1 <= k <= n");
    require(within_rate >= 0.0 && between_rate >= 0.0, "synth rates must be >= 0");
  }
}

Json to_json(const RunConfig& c) {
  Json j;
  j["command"] = to_string(c.command);
  j["input"] = c.input;
  j["output"] = c.output;
  j["fit"] = c.fit_path;
  j["attributes"] = c.attributes;
  j["hp"] = to_json(c.hp);
  j["n_restarts"] = c.n_restarts;
  j["fraction"] = c.fraction;
  j["n_subsets"] = c.n_subsets;
  j["subset_size"] = c.subset_size;
  j["seed"] = c.seed;
  j["zero_diagonal"] = c.zero_diagonal;
  j["symmetric_mask"] = c.symmetric_mask;
  if (c.command == Command::synth) {
    j["synth"] = {{"mode", c.synth_mode == SynthMode::planted ? "planted" : "generative"},
                  {"n", c.synth_n},
                  {"k", c.synth_k},
                  {"within", c.within_rate},
                  {"between", c.between_rate}};
  }
  return j;
}

RunConfig run_config_from_json(const Json& j) {
  try {
    RunConfig c;
    c.command = command_from_string(j.at("command").get<std::string>());
    c.input = j.value("input", "");
    c.output = j.value("output", "");
    c.fit_path = j.value("fit", "");
    c.attributes = j.value("attributes", "");
    if (j.contains("hp")) c.hp = hyperparameters_from_json(j["hp"]);
    c.n_restarts = j.value("n_restarts", c.n_restarts);
    c.fraction = j.value("fraction", c.fraction);
    c.n_subsets = j.value("n_subsets", c.n_subsets);
    c.subset_size = j.value("subset_size", c.subset_size);
    c.seed = j.at("seed").get<std::uint64_t>();
    c.zero_diagonal = j.value("zero_diagonal", false);
    c.symmetric_mask = j.value("symmetric_mask", false);
    if (j.contains("synth")) {
      const Json& s = j["synth"];
      const std::string mode = s.value("mode", "planted");
      if (mode != "planted" && mode != "generative") throw ValidationError("unknown synth mode '" + mode + "'");
      c.synth_mode = mode == "planted" ? SynthMode::planted : SynthMode::generative;
      c.synth_n = s.value("n", c.synth_n);
      c.synth_k = s.value("k", c.synth_k);
      c.within_rate = s.value("within", c.within_rate);
      c.between_rate = s.value("between", c.between_rate);
    }
    return c;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
}

Json manifest(const RunConfig& c) {
  Json j;
  j["tool"] = "cdbnmf";
  j["version"] = CDBNMF_VERSION;
  j["seed"] = c.seed;
  j["config"] = to_json(c);
  return j;
}

void run(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Json man = manifest(config);
  switch (config.command) {
    case Command::project: run_project(config, man, log); break;
    case Command::fit: run_fit(config, man, log); break;
    case Command::assign: run_assign(config, man, log); break;
    case Command::benchmark: run_benchmark(config, man, log); break;
    case Command::synth: run_synth(config, man, log); break;
  }
  write_json(config.output + ".manifest.json", man);
}

int report_exception(std::ostream& err) {
  try {
    throw;
  } catch (const ContractViolation& e) {
    err << "error: precondition violated: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    err << "error: parse: " << e.what() << '\n';
    return kValidation;
  } catch (const ValidationError& e) {
    err << "error: invalid data: " << e.what() << '\n';
    return kValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const NumericalFailure& e) {
    err << "error: numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }
}

int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Community detection in similarity networks with Bayesian NMF", "cdbnmf"};
  app.set_version_flag("--version", std::string(CDBNMF_VERSION));
  app.require_subcommand(1);

  RunConfig config;
  std::int64_t k0 = 0;
  std::string synth_mode = "planted";
  std::string replay_path;

  auto add_io = [&](CLI::App* sub, bool needs_input) {
    auto* in = sub->add_option("--in", config.input, "Input CSV");
    if (needs_input) in->required();
    sub->add_option("--out", config.output, "Output path; sidecars use it as a prefix")->required();
    sub->add_option("--seed", config.seed, "Base random seed")->capture_default_str();
  };
  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--k0", k0, "Initial number of communities (default min(N, 100))");
    sub->add_option("--a", config.hp.a, "Gamma shape of the ARD hyperprior")->capture_default_str();
    sub->add_option("--b", config.hp.b, "Gamma rate of the ARD hyperprior")->capture_default_str();
    sub->add_option("--iters", config.hp.n_iter, "Maximum sweeps")->capture_default_str();
    sub->add_option("--tol", config.hp.rel_tol, "Relative energy tolerance")->capture_default_str();
    sub->add_flag("--zero-diagonal", config.zero_diagonal, "Zero the diagonal of X before fitting");
  };

  auto* project = app.add_subcommand("project", "Learner x category CSV to learner x learner similarity CSV");
  add_io(project, true);

  auto* fitc = app.add_subcommand("fit", "Fit one BNMF model and write it as JSON");
  add_io(fitc, true);
  add_model(fitc);

  auto* assign = app.add_subcommand("assign", "Best-of-restarts fit and community assignment");
  add_io(assign, true);
  add_model(assign);
  assign->add_option("--restarts", config.n_restarts, "Number of restarts")->capture_default_str();
  assign->add_option("--fit", config.fit_path, "Assign from a saved fit instead");
  assign->add_option("--attributes", config.attributes, "Attribute CSV to profile communities");

  auto* bench = app.add_subcommand("benchmark", "Held-out benchmark against Pred-Avg and Pred-0");
  add_io(bench, true);
  add_model(bench);
  bench->add_option("--fraction", config.fraction, "Held-out fraction per row")->capture_default_str();
  bench->add_option("--subsets", config.n_subsets, "Number of random subsets")->capture_default_str();
  bench->add_option("--subset-size", config.subset_size, "Learners per subset")->capture_default_str();
  bench->add_flag("--symmetric-mask", config.symmetric_mask, "Hold out (j,i) with every (i,j)");

  auto* synth = app.add_subcommand("synth", "Write a synthetic similarity matrix");
  add_io(synth, false);
  synth->add_option("--mode", synth_mode, "planted or generative")
      ->check(CLI::IsMember({"planted", "generative"}))
      ->capture_default_str();
  synth->add_option("--n", config.synth_n, "Learners")->capture_default_str();
  synth->add_option("--k", config.synth_k, "Communities")->capture_default_str();
  synth->add_option("--within", config.within_rate, "Within-community rate")->capture_default_str();
  synth->add_option("--between", config.between_rate, "Between-community rate")->capture_default_str();
  synth->add_option("--a", config.hp.a, "Gamma shape (generative mode)")->capture_default_str();
  synth->add_option("--b", config.hp.b, "Gamma rate (generative mode)")->capture_default_str();

  auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay->add_option("manifest", replay_path, "Manifest JSON")->required(); 

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (replay->parsed()) {
      auto in = open_input(replay_path);
      Json j;
      try {
        j = Json::parse(in);
      } catch (const Json::exception& e) {
        throw ValidationError("'" + replay_path + "' is not valid JSON: " + e.what());
      }
      config = run_config_from_json(j.contains("config") ? j["config"] : j);
    } else {
      for (int i = 0; i < 5; ++i)
        if (app.got_subcommand(kCommands[i])) config.command = static_cast<Command>(i);
      for (auto* sub : {fitc, assign, bench})
        if (sub->parsed() && sub->count("--k0") > 0) config.hp.k0 = k0;
      config.synth_mode = synth_mode == "planted" ? SynthMode::planted : SynthMode::generative;
    }
    run(config, out);
    return kOk;
  } catch (...) {
    return report_exception(err);
  }
}

}  // namespace cdbnmf::cli
