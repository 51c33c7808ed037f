// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cure/labeling/client.hpp"
#include "cure/pipeline/run.hpp"

namespace cure::cli {

struct LabelingConfig {
  std::string backend = "offline";  // offline | live
  labeling::LiveClientConfig live;
  labeling::RetryPolicy retry;
  int concurrency = 1;
};

struct SweepConfig {
  std::vector<double> margins;  // defaults to {0, 0.1, ..., 0.9}
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::vector<std::string> modes = {"removal"};
};

/// Effective configuration of a CLI invocation: the run itself plus the
/// labeling backend, sweep grid and worker count.
struct CliConfig {
  pipeline::RunConfig run;
  LabelingConfig labeling;
  SweepConfig sweep;
  int workers = 1;  // sweep/ablation seeds in parallel

  CliConfig();
  void validate() const;
};

/// Nested JSON form; also the shape accepted by INI files, where each JSON
/// object is a [section] and the root seed sits before any section.
nlohmann::json to_json(const CliConfig& cfg);
CliConfig cli_config_from_json(const nlohmann::json& j);

/// Parses an INI file on top of the defaults. Unknown sections or keys,
/// derived keys and malformed values throw ConfigError naming the key.
CliConfig load_config(const std::filesystem::path& path);

/// Applies "section.key=value" (or "seed=value").
void apply_override(CliConfig& cfg, const std::string& assignment);

/// Writes `cfg` as an INI file that load_config reads back unchanged.
std::string to_ini(const CliConfig& cfg);

}  // namespace cure::cli
