// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cure/nn/tensor.hpp"

namespace cure::encoder {

struct EncoderConfig {
  std::size_t dim = 64;
  std::size_t buckets = std::size_t{1} << 14;
  std::uint64_t seed = 0x5eed;
  bool bigrams = true;
};

nlohmann::json to_json(const EncoderConfig& cfg);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

/// Rows of the batch that were empty after tokenization and received the
/// fixed null embedding.
struct EmbedReport {
  std::vector<std::size_t> null_rows;
};

/// Stand-in for a frozen pre-trained encoder: hashed unigram + bigram counts
/// projected through a seeded Gaussian matrix, then L2-normalized. The
/// projection lives outside the autodiff graph and is never trainable.
class FrozenEncoder {
 public:
  explicit FrozenEncoder(EncoderConfig cfg = {});

  const EncoderConfig& config() const { return cfg_; }
  std::size_t dim() const { return cfg_.dim; }

  /// Unit-norm embedding of one text.
  std::vector<double> embed_one(std::string_view text, bool* is_null = nullptr) const;

  /// [n x dim], no grad.
  template <typename T>
  nn::Tensor<T> embed(std::span<const std::string> texts, EmbedReport* report = nullptr) const;

  /// Hash of the projection matrix; constant for the encoder's lifetime.
  std::uint64_t weights_hash() const { return weights_hash_; }

 private:
  std::size_t bucket(std::string_view feature) const;

  EncoderConfig cfg_;
  std::vector<double> projection_;  // buckets x dim
  std::vector<double> null_embedding_;
  std::uint64_t weights_hash_ = 0;
};

/// Lowercased whitespace tokens.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace cure::encoder
