// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cure/common/rng.hpp"
#include "cure/nn/layers.hpp"

namespace cure::pipeline {

enum class Mode { kOff, kRemoval, kEnhancement };

const char* to_string(Mode mode);
/// Accepts "off", "removal", "enhancement"; throws ConfigError otherwise.
Mode mode_from_string(std::string_view s);

/// Width of the extractor's attention / feed-forward path. At d = 768 this is
/// 128, which puts the extractor at 1,779,968 parameters.
std::size_t default_extractor_inner(std::size_t d);
/// Hidden width of the debias SwiGLU block; 256 at d = 768 (1,181,696 total).
std::size_t default_debias_hidden(std::size_t d);

/// Content extractor f_phi and reversal network f_phi_hat (same class):
///   h(x) = LN_b(Lin_2(TL(LN_a(Lin_1 x))));   f(x) = x + s * h(x)
/// with a learnable per-dimension residual scale s. s = 0 is the identity.
template <typename T>
class ContentExtractor final : public nn::Module<T> {
 public:
  ContentExtractor(std::size_t d, Rng& rng, std::size_t inner = 0, double residual_init = 0.1);

  nn::Tensor<T> forward(const nn::Tensor<T>& x, std::size_t seq_len = 1) const;
  void collect_parameters(const std::string& prefix,
                          std::vector<nn::NamedParam<T>>& out) const override;

  nn::Tensor<T>& residual_scale() { return scale_; }
  /// Zeroes the residual scale so forward(x) == x.
  void make_identity();

 private:
  nn::Linear<T> in_;
  nn::LayerNorm<T> ln_in_;
  nn::TransformerEncoderLayer<T> block_;
  nn::Linear<T> out_;
  nn::LayerNorm<T> ln_out_;
  nn::Tensor<T> scale_;
};

/// f_psi: SwiGLU block followed by a linear layer, R^d -> R^d.
template <typename T>
class DebiasModule final : public nn::Module<T> {
 public:
  DebiasModule(std::size_t d, Rng& rng, std::size_t hidden = 0);

  nn::Tensor<T> forward(const nn::Tensor<T>& x) const;
  void collect_parameters(const std::string& prefix,
                          std::vector<nn::NamedParam<T>>& out) const override;

 private:
  nn::SwiGLU<T> block_;
  nn::Linear<T> out_;
};

struct ModelConfig {
  std::size_t dim = 64;
  std::size_t n_concepts = 6;
  std::size_t n_labels = 2;
  std::size_t extractor_inner = 0;  // 0 = default_extractor_inner(dim)
  std::size_t debias_hidden = 0;    // 0 = default_debias_hidden(dim)
  double residual_init = 0.1;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

enum class Part { kOmega, kPhi, kPhiHat, kPsi, kTheta };
inline constexpr Part kAllParts[] = {Part::kOmega, Part::kPhi, Part::kPhiHat, Part::kPsi,
                                     Part::kTheta};
const char* to_string(Part part);

/// The five trainable parts. Each part draws its initialization from its own
/// named substream of `seed`, so parts are independent of construction order.
template <typename T>
class CureModel {
 public:
  CureModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  nn::Linear<T> omega;             // concept head
  ContentExtractor<T> phi;         // content extractor
  ContentExtractor<T> phi_hat;     // reversal network
  DebiasModule<T> psi;             // debias module
  nn::Linear<T> theta;             // task head

  const nn::Module<T>& part(Part p) const;
  nn::Module<T>& part(Part p);

  /// Names are "<part>.<param>", e.g. "phi.block.attn.q.weight".
  std::vector<nn::NamedParam<T>> parameters() const;
  std::vector<nn::NamedParam<T>> parameters(Part p) const;

  /// Order-sensitive hash of a part's parameter values.
  std::uint64_t part_hash(Part p) const;

  /// Inference path: theta(psi(x)), or theta(x) for the baseline.
  nn::Tensor<T> task_logits(const nn::Tensor<T>& x, Mode mode) const;

 private:
  ModelConfig cfg_;
};

/// Parameter counts of phi and psi at an arbitrary width, computed by
/// instantiating the modules.
struct ParamCounts {
  std::size_t dim = 0;
  std::size_t extractor = 0;
  std::size_t debias = 0;
};
ParamCounts parameter_counts(std::size_t dim);

}  // namespace cure::pipeline
