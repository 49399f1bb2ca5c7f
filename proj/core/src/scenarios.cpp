#include "openrpf/scenarios.hpp"

#include <algorithm>

#include "openrpf/errors.hpp"

namespace openrpf {

bool has_scenario(const std::string& name) {
  const auto& lib = scenario_library();
  return std::any_of(lib.begin(), lib.end(), [&](const NamedScenario& s) { return s.name == name; });
}

ExperimentConfig load_scenario(const std::string& name) {
  for (const auto& s : scenario_library()) {
    if (s.name != name) continue;
    ExperimentConfig cfg = parse_config(s.config_text, "scenario:" + name);
    if (cfg.name.empty()) cfg.name = name;
    return cfg;
  }
  throw ValidationError("unknown scenario '" + name + "'");
}

}  // namespace openrpf
