// SPDX-License-Identifier: Apache-2.0
#include "cure/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "cure/common/errors.hpp"

namespace cure::nn {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename U>
void write_le(std::ostream& os, U v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U read_le(std::istream& is) {
  U v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(U));
  if (!is) throw IoError("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["format_version"] = kCheckpointVersion;
  header["seed"] = ckpt.seed;
  header["hyperparameters"] = ckpt.hyperparameters;
  header["metadata"] = ckpt.metadata;
  header["dtype"] = "f32";
  auto& plist = header["parameters"] = nlohmann::json::array();
  for (const auto& p : ckpt.params) {
    if (numel_of(p.shape) != p.values.size()) {
      throw DimensionError("checkpoint: parameter " + p.name + " has shape " +
                           shape_str(p.shape) + " but " + std::to_string(p.values.size()) +
                           " values");
    }
    plist.push_back({{"name", p.name}, {"shape", p.shape}});
  }
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("checkpoint: cannot open " + tmp.string());
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_le<std::uint32_t>(os, kCheckpointVersion);
    write_le<std::uint64_t>(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : ckpt.params) {
      os.write(reinterpret_cast<const char*>(p.values.data()),
               static_cast<std::streamsize>(p.values.size() * sizeof(float)));
    }
    if (!os) throw IoError("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw ParseError("checkpoint: bad magic in " + path.string());
  }
  const auto version = read_le<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw ParseError("checkpoint: unsupported format version " + std::to_string(version));
  }
  const auto len = read_le<std::uint64_t>(is);
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw IoError("checkpoint: truncated header in " + path.string());
  const auto header = nlohmann::json::parse(text);

  Checkpoint ckpt;
  ckpt.seed = header.at("seed").get<std::uint64_t>();
  ckpt.hyperparameters = header.value("hyperparameters", nlohmann::json::object());
  ckpt.metadata = header.value("metadata", nlohmann::json::object());
  for (const auto& entry : header.at("parameters")) {
    ParamBlob blob;
    blob.name = entry.at("name").get<std::string>();
    blob.shape = entry.at("shape").get<Shape>();
    blob.values.resize(numel_of(blob.shape));
    is.read(reinterpret_cast<char*>(blob.values.data()),
            static_cast<std::streamsize>(blob.values.size() * sizeof(float)));
    if (!is) throw IoError("checkpoint: truncated blob " + blob.name);
    ckpt.params.push_back(std::move(blob));
  }
  return ckpt;
}

template <typename T>
std::vector<ParamBlob> snapshot(const std::vector<NamedParam<T>>& params) {
  std::vector<ParamBlob> out;
  out.reserve(params.size());
  for (const auto& p : params) {
    ParamBlob b{p.name, p.tensor.shape(), {}};
    b.values.reserve(p.tensor.numel());
    for (T v : p.tensor.values()) b.values.push_back(static_cast<float>(v));
    out.push_back(std::move(b));
  }
  return out;
}

template <typename T>
void restore(const std::vector<NamedParam<T>>& params, const std::vector<ParamBlob>& blobs) {
  std::unordered_map<std::string, const ParamBlob*> by_name;
  for (const auto& b : blobs) by_name[b.name] = &b;
  for (const auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw DimensionError("checkpoint: missing parameter " + p.name);
    if (it->second->shape != p.tensor.shape()) {
      throw DimensionError("checkpoint: parameter " + p.name + " has shape " +
                           shape_str(it->second->shape) + ", model expects " +
                           shape_str(p.tensor.shape()));
    }
    auto dst = Tensor<T>(p.tensor).values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(it->second->values[i]);
  }
}

template std::vector<ParamBlob> snapshot(const std::vector<NamedParam<float>>&);
template std::vector<ParamBlob> snapshot(const std::vector<NamedParam<double>>&);
template void restore(const std::vector<NamedParam<float>>&, const std::vector<ParamBlob>&);
template void restore(const std::vector<NamedParam<double>>&, const std::vector<ParamBlob>&);

}  // namespace cure::nn
