// Named experiment scenarios with built-in default configurations.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cli/config.hpp"
#include "cli/report.hpp"

namespace qsl::cli {

struct Scenario {
  std::string name;
  std::string summary;
  Json defaults;
  std::function<ScenarioResult(const Json& config, unsigned threads)> run;
};

const std::vector<Scenario>& scenarios();
// Throws ConfigError for unknown names.
const Scenario& find_scenario(const std::string& name);

}  // namespace qsl::cli
