// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cure/common/rng.hpp"
#include "cure/nn/tensor.hpp"

namespace cure::nn {

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
};

/// Layers own their parameter handles. Copy is disabled because a copy would
/// alias the same parameter storage.
template <typename T>
class Module {
 public:
  Module() = default;
  virtual ~Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;
  Module(Module&&) noexcept = default;
  Module& operator=(Module&&) noexcept = default;

  virtual void collect_parameters(const std::string& prefix,
                                  std::vector<NamedParam<T>>& out) const = 0;

  std::vector<NamedParam<T>> parameters(const std::string& prefix = {}) const {
    std::vector<NamedParam<T>> out;
    collect_parameters(prefix, out);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.tensor.numel();
    return n;
  }

  void set_trainable(bool on) {
    for (auto& p : parameters()) p.tensor.set_requires_grad(on);
  }

  void zero_grad() {
    for (auto& p : parameters()) p.tensor.zero_grad();
  }
};

inline std::string join_name(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

/// y = x W + b with W stored [in x out]. Scaled uniform fan-in init.
template <typename T>
class Linear final : public Module<T> {
 public:
  Linear(std::size_t in, std::size_t out, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParam<T>>& out) const override;

  std::size_t in_features() const { return weight_.size(0); }
  std::size_t out_features() const { return weight_.size(1); }
  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

 private:
  Tensor<T> weight_;
  Tensor<T> bias_;
};

template <typename T>
class LayerNorm final : public Module<T> {
 public:
  explicit LayerNorm(std::size_t d, T eps = T(1e-5));
  Tensor<T> forward(const Tensor<T>& x) const;
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParam<T>>& out) const override;

 private:
  Tensor<T> gamma_;
  Tensor<T> beta_;
  T eps_;
};

/// Post-LN encoder layer with single-head self-attention:
///   h = LN1(x + O(attn(Q x, K x, V x)));  y = LN2(h + FF2(gelu(FF1(h))))
/// Attention and feed-forward both run at `inner` width. Input is
/// [n x d] holding n / seq_len independent sequences.
template <typename T>
class TransformerEncoderLayer final : public Module<T> {
 public:
  TransformerEncoderLayer(std::size_t d, std::size_t inner, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, std::size_t seq_len = 1) const;
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParam<T>>& out) const override;

 private:
  Linear<T> q_, k_, v_, o_;
  Linear<T> ff1_, ff2_;
  LayerNorm<T> ln1_, ln2_;
};

/// down(silu(gate x) * (value x)).
template <typename T>
class SwiGLU final : public Module<T> {
 public:
  SwiGLU(std::size_t d, std::size_t hidden, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParam<T>>& out) const override;

 private:
  Linear<T> gate_, value_, down_;
};

}  // namespace cure::nn
