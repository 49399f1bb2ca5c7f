#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "openrpf/config.hpp"

namespace openrpf {

enum class Subcommand { Solve, Escape, Correlations, Cones, Check };
std::optional<Subcommand> parse_subcommand(const std::string& name);

namespace exit_code {
inline constexpr int success = 0;
inline constexpr int validation = 1;
inline constexpr int invariant = 2;
inline constexpr int convergence = 3;
}  // namespace exit_code

struct RunOptions {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> format;  // csv | json
  bool quiet = false;
};

struct CheckRow {
  std::string scenario;
  std::string check;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

struct ResultBundle {
  std::string scenario;
  std::uint64_t config_hash = 0;
  std::string summary_json;  // per-module reports
  std::vector<std::pair<std::string, double>> timings;  // seconds
  std::vector<std::string> files;
  std::vector<CheckRow> checks;
  int exit_code = exit_code::success;
};

// Runs one pipeline and writes its files. Module errors propagate as
// exceptions carrying the scenario name.
ResultBundle run(const ExperimentConfig& config, Subcommand sub, const RunOptions& options);
// The invariant suite over every built-in scenario.
ResultBundle run_check(const RunOptions& options);

// Maps an in-flight exception to the documented exit codes.
int exit_code_for_current_exception(std::string& message);

}  // namespace openrpf
