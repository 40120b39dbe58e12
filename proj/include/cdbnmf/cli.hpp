#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cdbnmf/bnmf.hpp"
#include "cdbnmf/serialize.hpp"

namespace cdbnmf::cli {

enum class Command { project, fit, assign, benchmark, synth };

std::string to_string(Command c);
Command command_from_string(const std::string& s);

enum class SynthMode { planted, generative };

struct RunConfig {
  Command command = Command::fit;
  std::string input;       // C (project) or X (fit, assign, benchmark)
  std::string output;
  std::string fit_path;    // assign: reuse a saved fit instead of restarting
  std::string attributes;  // assign: optional attribute table to profile
  Hyperparameters hp;
  std::size_t n_restarts = 100;
  double fraction = 0.1;
  std::size_t n_subsets = 20;
  std::size_t subset_size = 50;
  std::uint64_t seed = 0;
  bool zero_diagonal = false;
  bool symmetric_mask = false;

  // synth
  SynthMode synth_mode = SynthMode::planted;
  std::size_t synth_n = 60;
  std::size_t synth_k = 3;
  double within_rate = 8.0;
  double between_rate = 0.5;

  void validate() const;
};

Json to_json(const RunConfig& c);
RunConfig run_config_from_json(const Json& j);

// Config plus tool name, version and seed.
Json manifest(const RunConfig& c);

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kValidation = 2;
inline constexpr int kNumerical = 3;

// Executes one command and writes its artifacts. Errors propagate as
// exceptions; see report_exception.
void run(const RunConfig& config, std::ostream& log);

// Maps the current exception to an exit code and prints it to err.
int report_exception(std::ostream& err);

// Full entry point: argument parsing, run, error mapping.
int main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace cdbnmf::cli
