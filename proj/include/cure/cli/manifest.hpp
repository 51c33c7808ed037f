// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace cure::cli {

/// Provenance of one CLI invocation. Written when the command starts
/// (status "running") and rewritten when it ends ("finalized" or "failed").
/// Wall-clock timings make this the one output that differs between
/// otherwise identical runs.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config = nlohmann::json::object();  // effective config
  std::string code_version;
  std::vector<std::uint64_t> seeds;
  nlohmann::json platform = nlohmann::json::object();
  std::map<std::string, std::string> stage_checksums;
  std::map<std::string, double> stage_seconds;
  std::map<std::string, std::string> outputs;  // relative path -> content hash
  std::string status = "running";
  std::string error;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest run_manifest_from_json(const nlohmann::json& j);

/// Temp file + rename, so readers never see a partial manifest.
void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

/// Compiler, standard library, OS, architecture, endianness.
nlohmann::json platform_fingerprint();

std::string code_version();

/// FNV-1a of a file's bytes, hex.
std::string file_hash(const std::filesystem::path& path);

}  // namespace cure::cli
