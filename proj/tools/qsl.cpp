// qsl: run named experiment scenarios and write their reports.
//
//   qsl <scenario> [--config FILE] [--seed N] [--out DIR] [--threads N]
//   qsl run <scenario> [same flags]
//   qsl list
//   qsl defaults <scenario>
//
// Exit status: 0 when every scenario assertion passes, 1 on a failed
// scenario (its report is still written), 2 on an invalid configuration.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "cli/config.hpp"
#include "cli/report.hpp"
#include "cli/scenarios.hpp"
#include "qsl/errors.hpp"

using namespace qsl::cli;

namespace {

constexpr const char* kOutputEnv = "QSL_OUTPUT_DIR";

struct Flags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  unsigned threads = 0;
};

void add_flags(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON configuration merged over the scenario defaults")->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "master seed (overrides the configuration)");
  app->add_option("--out", f.out, std::string("output directory (default: $") + kOutputEnv + " or ./qsl_out)");
  app->add_option("--threads", f.threads, "worker threads (0: hardware concurrency)");
}

std::string output_dir(const Flags& f) {
  if (f.out) return *f.out;
  if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
  return "qsl_out";
}

int run_scenario(const std::string& name, const Flags& f) {
  Json config;
  const Scenario* scenario = nullptr;
  try {
    scenario = &find_scenario(name);
    config = resolve_config(scenario->defaults, f.config, f.seed, std::nullopt);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  const unsigned threads = f.threads ? f.threads : std::max(1u, std::thread::hardware_concurrency());
  ScenarioResult result;
  try {
    result = scenario->run(config, threads);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const qsl::InvalidRun& e) {
    // A run that broke its own validity bounds is a failed scenario.
    result.pass = false;
    result.metrics["error"] = e.what();
  } catch (const qsl::Error& e) {
    std::cerr << "config: " << e.what() << '\n';
    return 2;
  }
  const std::string report = write_outputs(output_dir(f), name, config, result);
  std::cout << (result.pass ? "PASS " : "FAIL ") << name << " -> " << report << '\n';
  return result.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum-state experiment driver"};
  app.require_subcommand(1);

  Flags flags;
  std::string target;
  auto* run = app.add_subcommand("run", "run a named scenario");
  run->add_option("scenario", target, "scenario name")->required();
  add_flags(run, flags);

  auto* list = app.add_subcommand("list", "list scenarios");
  std::string shown;
  auto* defaults = app.add_subcommand("defaults", "print the default configuration of a scenario");
  defaults->add_option("scenario", shown, "scenario name")->required();

  std::vector<std::pair<CLI::App*, std::string>> direct;
  for (const auto& s : scenarios()) {
    auto* sub = app.add_subcommand(s.name, s.summary);
    add_flags(sub, flags);
    direct.emplace_back(sub, s.name);
  }

  CLI11_PARSE(app, argc, argv);

  if (*list) {
    for (const auto& s : scenarios()) std::printf("%-26s %s\n", s.name.c_str(), s.summary.c_str());
    return 0;
  }
  if (*defaults) {
    try {
      std::cout << find_scenario(shown).defaults.dump(2) << '\n';
    } catch (const ConfigError& e) {
      std::cerr << e.what() << '\n';
      return 2;
    }
    return 0;
  }
  if (*run) return run_scenario(target, flags);
  for (const auto& [sub, name] : direct)
    if (*sub) return run_scenario(name, flags);
  return 2;
}
