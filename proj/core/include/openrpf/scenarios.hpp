#pragma once

#include <string>
#include <vector>

#include "openrpf/config.hpp"

namespace openrpf {

struct NamedScenario {
  std::string name;
  std::string config_text;
};

const std::vector<NamedScenario>& scenario_library();
bool has_scenario(const std::string& name);
ExperimentConfig load_scenario(const std::string& name);

}  // namespace openrpf
