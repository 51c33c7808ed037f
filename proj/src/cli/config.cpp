// SPDX-License-Identifier: Apache-2.0
#include "cure/cli/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <sstream>

#include "cure/common/errors.hpp"
#include "cure/evaluation/experiments.hpp"

namespace cure::cli {

namespace {

// Keys computed from other settings; accepting them would silently do nothing.
const std::map<std::string, std::string> kDerivedKeys = {
    {"corpus.seed", "derived from the root seed"},
    {"encoder.dim", "taken from model.dim"},
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": '" + v + "' is not a number");
  }
  return out;
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": '" + v + "' is not an integer");
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": '" + v + "' is not a non-negative integer");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": '" + v + "' is not a boolean");
}

// Converts `raw` to the JSON type of the default value at `slot`.
nlohmann::json typed_value(const std::string& key, const nlohmann::json& slot,
                           const std::string& raw) {
  const std::string v = trim(raw);
  switch (slot.type()) {
    case nlohmann::json::value_t::boolean: return parse_bool(key, v);
    case nlohmann::json::value_t::number_unsigned: return parse_uint(key, v);
    case nlohmann::json::value_t::number_integer: return parse_int(key, v);
    case nlohmann::json::value_t::number_float: return parse_double(key, v);
    case nlohmann::json::value_t::string: return v;
    default: break;
  }
  if (key == "sweep.margins") {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& item : split_list(v)) arr.push_back(parse_double(key, item));
    return arr;
  }
  if (key == "sweep.seeds") {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& item : split_list(v)) arr.push_back(parse_uint(key, item));
    return arr;
  }
  if (key == "sweep.modes") return split_list(v);
  throw ConfigError(key + " cannot be set from a config file");
}

void set_key(nlohmann::json& j, const std::string& section, const std::string& key,
             const std::string& value) {
  const std::string full = section.empty() ? key : section + "." + key;
  if (auto it = kDerivedKeys.find(full); it != kDerivedKeys.end()) {
    throw ConfigError(full + " cannot be set: " + it->second);
  }
  nlohmann::json* scope = &j;
  if (!section.empty()) {
    if (!j.contains(section) || !j[section].is_object()) {
      throw ConfigError("unknown config section [" + section + "]");
    }
    scope = &j[section];
  }
  if (!scope->contains(key) || (*scope)[key].is_object()) {
    throw ConfigError("unknown config key " + full);
  }
  (*scope)[key] = typed_value(full, (*scope)[key], value);
}

}  // namespace

CliConfig::CliConfig() { sweep.margins = evaluation::default_margin_grid(); }

void CliConfig::validate() const {
  run.validate();
  if (labeling.backend != "offline" && labeling.backend != "live") {
    throw ConfigError("labeling.backend must be offline or live, got '" + labeling.backend + "'");
  }
  labeling.retry.validate();
  if (labeling.concurrency < 1) throw ConfigError("labeling.concurrency must be at least 1");
  if (workers < 1) throw ConfigError("runtime.workers must be at least 1");
  for (double m : sweep.margins) {
    if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("sweep.margins must lie in [0, 1]");
  }
  if (sweep.margins.empty()) throw ConfigError("sweep.margins is empty");
  if (sweep.seeds.empty()) throw ConfigError("sweep.seeds is empty");
  if (sweep.modes.empty()) throw ConfigError("sweep.modes is empty");
  for (const auto& m : sweep.modes) {
    if (pipeline::mode_from_string(m) == pipeline::Mode::kOff) {
      throw ConfigError("sweep.modes cannot include off");
    }
  }
}

nlohmann::json to_json(const CliConfig& cfg) {
  nlohmann::json j = pipeline::to_json(cfg.run);
  j["corpus"].erase("seed");
  j["encoder"].erase("dim");
  const auto& m = cfg.run.model;
  j["model"] = {{"dim", m.dim},
                {"extractor_inner", m.extractor_inner},
                {"debias_hidden", m.debias_hidden},
                {"residual_init", m.residual_init}};
  const auto& l = cfg.labeling;
  j["labeling"] = {{"backend", l.backend},
                   {"endpoint", l.live.endpoint},
                   {"model", l.live.model},
                   {"auth_env", l.live.auth_env},
                   {"timeout_s", static_cast<std::int64_t>(l.live.timeout.count())},
                   {"max_attempts", l.retry.max_attempts},
                   {"backoff_ms", static_cast<std::int64_t>(l.retry.backoff.count())},
                   {"backoff_multiplier", l.retry.backoff_multiplier},
                   {"concurrency", l.concurrency}};
  j["sweep"] = {{"margins", cfg.sweep.margins},
                {"seeds", cfg.sweep.seeds},
                {"modes", cfg.sweep.modes}};
  j["runtime"] = {{"workers", cfg.workers}};
  return j;
}

CliConfig cli_config_from_json(const nlohmann::json& j) {
  CliConfig cfg;
  cfg.run = pipeline::run_config_from_json(j);
  if (j.contains("labeling")) {
    const auto& l = j["labeling"];
    cfg.labeling.backend = l.value("backend", cfg.labeling.backend);
    cfg.labeling.live.endpoint = l.value("endpoint", cfg.labeling.live.endpoint);
    cfg.labeling.live.model = l.value("model", cfg.labeling.live.model);
    cfg.labeling.live.auth_env = l.value("auth_env", cfg.labeling.live.auth_env);
    cfg.labeling.live.timeout =
        std::chrono::seconds(l.value("timeout_s", cfg.labeling.live.timeout.count()));
    cfg.labeling.retry.max_attempts = l.value("max_attempts", cfg.labeling.retry.max_attempts);
    cfg.labeling.retry.backoff =
        std::chrono::milliseconds(l.value("backoff_ms", cfg.labeling.retry.backoff.count()));
    cfg.labeling.retry.backoff_multiplier =
        l.value("backoff_multiplier", cfg.labeling.retry.backoff_multiplier);
    cfg.labeling.concurrency = l.value("concurrency", cfg.labeling.concurrency);
  }
  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    cfg.sweep.margins = s.value("margins", cfg.sweep.margins);
    cfg.sweep.seeds = s.value("seeds", cfg.sweep.seeds);
    cfg.sweep.modes = s.value("modes", cfg.sweep.modes);
  }
  if (j.contains("runtime")) cfg.workers = j["runtime"].value("workers", cfg.workers);
  return cfg;
}

CliConfig load_config(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    if (!std::filesystem::exists(path)) throw IoError("config file not found: " + path.string());
    throw ConfigError("config " + path.string() + ": " + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }
  CliConfig cfg;
  nlohmann::json j = to_json(cfg);
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      set_key(j, "", name, node.data());
      continue;
    }
    for (const auto& [key, leaf] : node) set_key(j, name, key, leaf.data());
  }
  cfg = cli_config_from_json(j);
  cfg.validate();
  return cfg;
}

void apply_override(CliConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' must look like section.key=value");
  }
  const std::string lhs = trim(assignment.substr(0, eq));
  const auto dot = lhs.find('.');
  nlohmann::json j = to_json(cfg);
  if (dot == std::string::npos) {
    set_key(j, "", lhs, assignment.substr(eq + 1));
  } else {
    set_key(j, lhs.substr(0, dot), lhs.substr(dot + 1), assignment.substr(eq + 1));
  }
  cfg = cli_config_from_json(j);
}

std::string to_ini(const CliConfig& cfg) {
  const nlohmann::json j = to_json(cfg);
  auto scalar = [](const nlohmann::json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) return evaluation::format_double(v.get<double>());
    if (v.is_array()) {
      std::string out;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += v[i].is_number_float() ? evaluation::format_double(v[i].get<double>())
               : v[i].is_string()     ? v[i].get<std::string>()
                                      : v[i].dump();
      }
      return out;
    }
    return v.dump();
  };
  std::ostringstream os;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_object()) os << k << " = " << scalar(v) << '\n';
  }
  for (const auto& [section, body] : j.items()) {
    if (!body.is_object()) continue;
    os << "\n[" << section << "]\n";
    for (const auto& [k, v] : body.items()) os << k << " = " << scalar(v) << '\n';
  }
  return os.str();
}

}  // namespace cure::cli
