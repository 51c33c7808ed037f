// SPDX-License-Identifier: Apache-2.0
#include "cure/encoder/frozen_encoder.hpp"

#include <cctype>
#include <cmath>
#include <cstring>

#include "cure/common/errors.hpp"
#include "cure/common/hash.hpp"
#include "cure/common/rng.hpp"

namespace cure::encoder {

namespace {

void normalize(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  const double n = std::sqrt(s);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
}

}  // namespace

nlohmann::json to_json(const EncoderConfig& cfg) {
  return {{"dim", cfg.dim}, {"buckets", cfg.buckets}, {"seed", cfg.seed}, {"bigrams", cfg.bigrams}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig cfg;
  cfg.dim = j.value("dim", cfg.dim);
  cfg.buckets = j.value("buckets", cfg.buckets);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.bigrams = j.value("bigrams", cfg.bigrams);
  return cfg;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

FrozenEncoder::FrozenEncoder(EncoderConfig cfg) : cfg_(cfg) {
  if (cfg_.dim < 2) throw ConfigError("encoder.dim must be at least 2");
  if (cfg_.buckets == 0) throw ConfigError("encoder.buckets must be positive");
  Rng rng(cfg_.seed, "encoder.projection");
  projection_.resize(cfg_.buckets * cfg_.dim);
  for (double& w : projection_) w = rng.normal();
  null_embedding_.resize(cfg_.dim);
  Rng null_rng(cfg_.seed, "encoder.null");
  for (double& w : null_embedding_) w = null_rng.normal();
  normalize(null_embedding_);
  weights_hash_ = fnv1a64_bytes(std::as_bytes(std::span<const double>(projection_)));
}

std::size_t FrozenEncoder::bucket(std::string_view feature) const {
  return static_cast<std::size_t>(fnv1a64(feature, cfg_.seed) % cfg_.buckets);
}

std::vector<double> FrozenEncoder::embed_one(std::string_view text, bool* is_null) const {
  const auto tokens = tokenize(text);
  if (is_null) *is_null = tokens.empty();
  if (tokens.empty()) return null_embedding_;
  std::vector<double> out(cfg_.dim, 0.0);
  auto add_feature = [&](const std::string& feature) {
    const double* row = &projection_[bucket(feature) * cfg_.dim];
    for (std::size_t j = 0; j < cfg_.dim; ++j) out[j] += row[j];
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add_feature("u:" + tokens[i]);
    if (cfg_.bigrams && i + 1 < tokens.size()) add_feature("b:" + tokens[i] + ' ' + tokens[i + 1]);
  }
  normalize(out);
  return out;
}

template <typename T>
nn::Tensor<T> FrozenEncoder::embed(std::span<const std::string> texts, EmbedReport* report) const {
  std::vector<T> values;
  values.reserve(texts.size() * cfg_.dim);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    bool null = false;
    for (double v : embed_one(texts[i], &null)) values.push_back(static_cast<T>(v));
    if (null && report) report->null_rows.push_back(i);
  }
  return nn::Tensor<T>::from({texts.size(), cfg_.dim}, std::move(values), false);
}

template nn::Tensor<float> FrozenEncoder::embed(std::span<const std::string>, EmbedReport*) const;
template nn::Tensor<double> FrozenEncoder::embed(std::span<const std::string>,
                                                 EmbedReport*) const;

}  // namespace cure::encoder
