// Experiment configuration: JSON trees merged over scenario defaults.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace qsl::cli {

using Json = nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Keys whose values are polymorphic specs checked by their builders rather
// than against the defaults tree.
inline const std::vector<std::string> kOpenNodes{"/initial_state", "/ensemble",        "/hamiltonian/potential",
                                                "/branches/first", "/branches/second", "/x_state",
                                                "/perp/x_state",   "/subspace"};

// Every key in `user` must exist in `defaults` with the same JSON type
// (integers are accepted where floats are expected). Throws ConfigError with
// the offending path.
void validate_against(const Json& user, const Json& defaults, const std::string& path = "");

// Theory labels of a configuration and the ensemble rule: psi-* theories
// need an ensemble block; W theories with an "iph" initial state forbid one.
void validate_theory(const Json& config);

Json load_config_file(const std::string& path);

struct RunSettings {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string output_dir;
};

// Defaults <- file (merge patch) <- command-line overrides, then validation.
Json resolve_config(const Json& defaults, const std::optional<std::string>& file,
                    const std::optional<std::uint64_t>& seed, const std::optional<std::string>& output_dir);

// Checked accessors with path-qualified errors.
double get_double(const Json& node, const char* key);
std::int64_t get_int(const Json& node, const char* key);
bool get_bool(const Json& node, const char* key);
std::string get_string(const Json& node, const char* key);
std::vector<double> get_doubles(const Json& node, const char* key);
const Json& get_object(const Json& node, const char* key);

// Rejects members of an open spec object outside `allowed`.
void require_keys(const Json& node, std::initializer_list<const char*> allowed, const std::string& where);

}  // namespace qsl::cli
