#pragma once

#include "cli/io.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace causalis::cli {

inline constexpr const char *kToolName = "causalis";
inline constexpr const char *kToolVersion = "0.1.0";

enum ExitCode { kOk = 0, kInternalError = 1, kInvalidInput = 2, kSolverFailure = 3, kRejected = 4 };

struct RunConfig {
  std::string command;    // e.g. "certify"
  std::string subcommand; // e.g. "dd", empty for single-word commands
  // flag name without dashes -> file paths
  std::map<std::string, std::vector<std::string>> inputs;
  std::optional<std::string> scenario;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  std::optional<long long> dim, trials, count;
  bool separable = false;
  std::string out;
  std::string format = "json";
};

struct Report {
  json body;
  int exit_code = kOk;
};

Report run(const RunConfig &config);

// Re-checks the certificates of a report against the inputs it embeds,
// without calling the solver.
bool verify_report(const json &report, std::string *problem = nullptr);

std::string serialize(const json &report);
std::string render_text(const json &report);

std::vector<std::string> command_names();

} // namespace causalis::cli
