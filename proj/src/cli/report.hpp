// Scenario results and their on-disk form: <scenario>.report.json plus CSVs.

#pragma once

#include <string>
#include <vector>

#include "cli/config.hpp"
#include "qsl/equivalence.hpp"

namespace qsl::cli {

struct Artifact {
  std::string file;  // name relative to the output directory
  std::string content;
};

struct ScenarioResult {
  Json metrics = Json::object();
  bool pass = false;
  std::vector<Artifact> artifacts;
};

// Report text: sorted keys, no timings, so equal inputs give equal bytes.
std::string render_report(const std::string& scenario, const Json& config, const ScenarioResult& result);

// Writes the report and artifacts; returns the report path.
std::string write_outputs(const std::string& dir, const std::string& scenario, const Json& config,
                          const ScenarioResult& result);

Json to_json(const DistributionReport& r);
Json to_json(const RealVector& v);

// site,x,<columns...> table of per-site values.
std::string site_table_csv(const Grid& grid, const std::vector<std::string>& names,
                           const std::vector<const RealVector*>& columns);

}  // namespace qsl::cli
