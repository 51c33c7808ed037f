// SPDX-License-Identifier: Apache-2.0
#include "cure/cli/manifest.hpp"

#include <sys/utsname.h>

#include <bit>
#include <fstream>
#include <sstream>

#include "cure/common/errors.hpp"
#include "cure/common/hash.hpp"

#ifndef CURE_VERSION
#define CURE_VERSION "unknown"
#endif
#ifndef CURE_GIT_REVISION
#define CURE_GIT_REVISION ""
#endif

namespace cure::cli {

nlohmann::json to_json(const RunManifest& m) {
  return {{"command", m.command},
          {"argv", m.argv},
          {"config", m.config},
          {"code_version", m.code_version},
          {"seeds", m.seeds},
          {"platform", m.platform},
          {"stage_checksums", m.stage_checksums},
          {"stage_seconds", m.stage_seconds},
          {"outputs", m.outputs},
          {"status", m.status},
          {"error", m.error}};
}

RunManifest run_manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  m.command = j.value("command", "");
  m.argv = j.value("argv", m.argv);
  m.config = j.value("config", m.config);
  m.code_version = j.value("code_version", "");
  m.seeds = j.value("seeds", m.seeds);
  m.platform = j.value("platform", m.platform);
  m.stage_checksums = j.value("stage_checksums", m.stage_checksums);
  m.stage_seconds = j.value("stage_seconds", m.stage_seconds);
  m.outputs = j.value("outputs", m.outputs);
  m.status = j.value("status", "");
  m.error = j.value("error", "");
  return m;
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << to_json(m).dump(2) << '\n';
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest " + path.string());
  try {
    return run_manifest_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest " + path.string() + ": " + e.what());
  }
}

nlohmann::json platform_fingerprint() {
  nlohmann::json j;
#if defined(__clang__)
  j["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  j["compiler"] = std::string("gcc ") + __VERSION__;
#else
  j["compiler"] = "unknown";
#endif
  j["cplusplus"] = __cplusplus;
  j["endianness"] = std::endian::native == std::endian::little ? "little" : "big";
  j["pointer_bits"] = sizeof(void*) * 8;
  utsname u{};
  if (uname(&u) == 0) {
    j["os"] = std::string(u.sysname) + " " + u.release;
    j["arch"] = u.machine;
  }
  return j;
}

std::string code_version() {
  std::string v = CURE_VERSION;
  const std::string rev = CURE_GIT_REVISION;
  if (!rev.empty()) v += "+" + rev;
  return v;
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex64(fnv1a64(ss.str()));
}

}  // namespace cure::cli
