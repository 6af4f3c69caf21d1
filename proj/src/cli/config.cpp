#include "cli/config.hpp"

#include <algorithm>
#include <fstream>

namespace qsl::cli {

namespace {

bool compatible(const Json& user, const Json& def) {
  if (def.is_null() || user.is_null()) return true;
  if (def.is_number()) return user.is_number();
  return user.type() == def.type();
}

const char* type_name(const Json& j) { return j.type_name(); }

}  // namespace

void validate_against(const Json& user, const Json& defaults, const std::string& path) {
  if (!user.is_object()) throw ConfigError("config" + path + ": expected an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string here = path + "/" + it.key();
    if (!defaults.contains(it.key())) throw ConfigError("config: unknown key " + here);
    const Json& def = defaults.at(it.key());
    if (!compatible(it.value(), def))
      throw ConfigError("config: " + here + " must be " + type_name(def) + ", got " + type_name(it.value()));
    if (def.is_number_integer() && it.value().is_number_float())
      throw ConfigError("config: " + here + " must be an integer");
    const bool open = std::find(kOpenNodes.begin(), kOpenNodes.end(), here) != kOpenNodes.end();
    if (!open && def.is_object() && it->is_object() && !def.empty()) validate_against(it.value(), def, here);
  }
}

void validate_theory(const Json& config) {
  const bool has_ensemble = config.contains("ensemble") && !config["ensemble"].is_null();
  const bool iph = config.contains("initial_state") && config["initial_state"].is_object() &&
                   config["initial_state"].value("kind", "") == "iph";
  if (!config.contains("theory") || config["theory"].is_null()) return;
  const std::string theory = config["theory"].get<std::string>();
  static const std::vector<std::string> known{"psi-bm", "w-bm", "psi-grw", "w-grw", "psi-everett", "w-everett"};
  if (std::find(known.begin(), known.end(), theory) == known.end())
    throw ConfigError("config: unknown theory '" + theory + "'");
  if (theory.rfind("psi-", 0) == 0) {
    if (!has_ensemble) throw ConfigError("config: theory " + theory + " requires an ensemble block");
  } else {
    if (!config.contains("initial_state") || config["initial_state"].is_null())
      throw ConfigError("config: theory " + theory + " requires an initial_state block");
    if (iph && has_ensemble) throw ConfigError("config: theory " + theory + " with an iph initial state forbids an ensemble block");
  }
}

Json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config: parse error in ") + path + ": " + e.what());
  }
}

namespace {

// Merge patch that keeps explicit nulls (they switch a block off) and
// replaces open nodes wholesale, so a new spec kind never inherits members
// of the default one.
void merge_into(Json& target, const Json& patch, const std::string& path) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string here = path + "/" + it.key();
    const bool open = std::find(kOpenNodes.begin(), kOpenNodes.end(), here) != kOpenNodes.end();
    if (it->is_null()) {
      target[it.key()] = nullptr;
    } else if (!open && it->is_object() && target.contains(it.key()) && target[it.key()].is_object()) {
      merge_into(target[it.key()], it.value(), here);
    } else {
      target[it.key()] = it.value();
    }
  }
}

}  // namespace

Json resolve_config(const Json& defaults, const std::optional<std::string>& file,
                    const std::optional<std::uint64_t>& seed, const std::optional<std::string>& output_dir) {
  Json config = defaults;
  if (file) {
    const Json user = load_config_file(*file);
    validate_against(user, defaults);
    merge_into(config, user, "");
  }
  if (seed) config["seed"] = *seed;
  if (output_dir) config["output_dir"] = *output_dir;
  validate_theory(config);
  return config;
}

namespace {

const Json& member(const Json& node, const char* key) {
  if (!node.is_object() || !node.contains(key)) throw ConfigError(std::string("config: missing key '") + key + "'");
  return node.at(key);
}

}  // namespace

double get_double(const Json& node, const char* key) {
  const Json& v = member(node, key);
  if (!v.is_number()) throw ConfigError(std::string("config: '") + key + "' must be a number");
  return v.get<double>();
}

std::int64_t get_int(const Json& node, const char* key) {
  const Json& v = member(node, key);
  if (!v.is_number_integer()) throw ConfigError(std::string("config: '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

bool get_bool(const Json& node, const char* key) {
  const Json& v = member(node, key);
  if (!v.is_boolean()) throw ConfigError(std::string("config: '") + key + "' must be a boolean");
  return v.get<bool>();
}

std::string get_string(const Json& node, const char* key) {
  const Json& v = member(node, key);
  if (!v.is_string()) throw ConfigError(std::string("config: '") + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> get_doubles(const Json& node, const char* key) {
  const Json& v = member(node, key);
  if (!v.is_array()) throw ConfigError(std::string("config: '") + key + "' must be an array");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(std::string("config: '") + key + "' must hold numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

const Json& get_object(const Json& node, const char* key) {
  const Json& v = member(node, key);
  if (!v.is_object()) throw ConfigError(std::string("config: '") + key + "' must be an object");
  return v;
}

void require_keys(const Json& node, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!node.is_object()) throw ConfigError("config: " + where + " must be an object");
  for (auto it = node.begin(); it != node.end(); ++it) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; });
    if (!ok) throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace qsl::cli
