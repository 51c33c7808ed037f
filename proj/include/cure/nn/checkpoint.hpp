// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cure/nn/layers.hpp"

namespace cure::nn {

inline constexpr char kCheckpointMagic[8] = {'C', 'U', 'R', 'E', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ParamBlob {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

/// On disk:
///   8-byte magic "CURECKPT"
///   u32 LE format version
///   u64 LE header length, then that many bytes of UTF-8 JSON header:
///     {"format_version", "seed", "hyperparameters": {...},
///      "parameters": [{"name", "shape"}...], plus caller metadata}
///   raw little-endian f32 blobs, one per header parameter, in header order.
struct Checkpoint {
  std::uint64_t seed = 0;
  nlohmann::json hyperparameters = nlohmann::json::object();
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<ParamBlob> params;
};

/// Writes to a temporary sibling and renames over `path`.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename T>
std::vector<ParamBlob> snapshot(const std::vector<NamedParam<T>>& params);

/// Copies blob values into same-named parameters. Throws DimensionError on a
/// missing name or a shape mismatch.
template <typename T>
void restore(const std::vector<NamedParam<T>>& params, const std::vector<ParamBlob>& blobs);

}  // namespace cure::nn
