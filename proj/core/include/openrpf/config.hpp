#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "openrpf/cone_metric.hpp"
#include "openrpf/rpf_solver.hpp"

namespace openrpf {

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

// `[section]` headers followed by `key = value` lines; `#` starts a comment.
// Keys may repeat (branch rows).
class ConfigDocument {
 public:
  static ConfigDocument parse(std::string_view text, std::string source = "<config>");

  const std::string& source() const { return source_; }
  std::vector<std::string> sections() const;
  bool has_section(const std::string& name) const { return sections_.count(name) > 0; }
  const std::vector<ConfigEntry>& entries(const std::string& section) const;
  const ConfigEntry* find(const std::string& section, const std::string& key) const;
  int section_line(const std::string& section) const;

  // Sorted sections and keys, whitespace-normalized; hashed for ResultBundle.
  std::string canonical() const;

  [[noreturn]] void fail(int line, const std::string& field, const std::string& problem) const;

 private:
  std::string source_;
  std::map<std::string, std::vector<ConfigEntry>> sections_;
  std::map<std::string, int> section_lines_;
};

struct AnalysisSettings {
  int functional_depth = 20;
  std::size_t samples = 100;
  std::uint64_t seed = 1;
  std::size_t fiber = 0;
  int escape_n_max = 40;
  int geometric_depth = 10;
  int correlation_n_max = 30;
  int invariance_depth = 6;
  std::size_t invariance_sets = 256;
  int contraction_iterates = 0;  // 0: use the block length R
  std::size_t contraction_pairs = 20;
  std::string observable_f = "x";
  std::string observable_g = "x";
  double tolerance = 1e-8;  // identity tolerance used by `check`
};

struct OutputSettings {
  std::string dir = "out";
  std::string format = "csv";
  bool export_matrices = false;
};

// Which parts of the invariant suite apply to a scenario.
struct CheckSettings {
  bool cones = true;
  double escape_tolerance = 1e-6;
  double start_tolerance = 1e-8;  // starting-function independence of q
};

struct ExperimentConfig {
  std::string name;
  RandomSystem system;
  Potential potential;
  Discretization discretization;
  SolverSettings solver;
  AnalysisSettings analysis;
  ConeParams cones;
  OutputSettings outputs;
  CheckSettings check;
  std::string canonical;
  std::uint64_t hash = 0;
};

std::uint64_t fnv1a64(std::string_view bytes);

// Both throw ValidationError with "source:line: field: problem" messages.
ExperimentConfig parse_config(std::string_view text, std::string source = "<config>");
ExperimentConfig load_config(const std::string& path);

// Accepts decimals and p/q fractions.
double parse_number(std::string_view token);

}  // namespace openrpf
