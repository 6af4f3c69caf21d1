#include "cli/report.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace qsl::cli {

std::string render_report(const std::string& scenario, const Json& config, const ScenarioResult& result) {
  Json report;
  report["scenario"] = scenario;
  report["config"] = config;
  report["seed"] = config.value("seed", Json());
  report["metrics"] = result.metrics;
  report["pass"] = result.pass;
  Json files = Json::array();
  for (const auto& a : result.artifacts) files.push_back(a.file);
  report["artifacts"] = files;
  return report.dump(2) + "\n";
}

std::string write_outputs(const std::string& dir, const std::string& scenario, const Json& config,
                          const ScenarioResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path report = fs::path(dir) / (scenario + ".report.json");
  {
    std::ofstream out(report, std::ios::binary);
    out << render_report(scenario, config, result);
    if (!out) throw std::runtime_error("cannot write " + report.string());
  }
  for (const auto& a : result.artifacts) {
    std::ofstream out(fs::path(dir) / a.file, std::ios::binary);
    out << a.content;
    if (!out) throw std::runtime_error("cannot write " + a.file);
  }
  return report.string();
}

Json to_json(const RealVector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json to_json(const DistributionReport& r) {
  Json j;
  j["tv_distance"] = r.tv_distance;
  j["ks_statistic"] = r.ks_statistic;
  j["ks_p_value"] = r.ks_p_value;
  j["samples_a"] = r.samples_a;
  j["samples_b"] = r.samples_b;
  j["threshold"] = r.threshold;
  j["pass"] = r.pass;
  j["rejected_fraction_a"] = r.rejected_fraction_a;
  j["rejected_fraction_b"] = r.rejected_fraction_b;
  j["histogram_a"] = to_json(r.histogram_a);
  j["histogram_b"] = to_json(r.histogram_b);
  if (r.bit_identical) j["bit_identical"] = *r.bit_identical;
  return j;
}

std::string site_table_csv(const Grid& grid, const std::vector<std::string>& names,
                           const std::vector<const RealVector*>& columns) {
  std::ostringstream out;
  out.precision(17);
  out << "site";
  for (int p = 1; p <= grid.particles; ++p) out << ",x" << p;
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (Index q = 0; q < grid.total_dim; ++q) {
    out << q;
    for (int idx : grid.unflatten(q)) out << ',' << grid.coordinate(idx);
    for (const auto* c : columns) out << ',' << (*c)[q];
    out << '\n';
  }
  return out.str();
}

}  // namespace qsl::cli
