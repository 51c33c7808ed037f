// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cure/nn/tensor.hpp"

namespace cure::nn {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Moments for one parameter tensor.
template <typename T>
struct AdamWSlot {
  std::vector<T> m;
  std::vector<T> v;
};

/// One decoupled-weight-decay Adam update of `params` in place. `t` is the
/// 1-based step index used for bias correction. The decay term
/// `lr * weight_decay * p` never enters the moment estimates.
template <typename T>
void adamw_step(std::span<T> params, std::span<const T> grads, AdamWSlot<T>& slot,
                const AdamWConfig& cfg, std::int64_t t);

/// Optimizer over a fixed set of parameter tensors. A parameter without an
/// allocated grad is treated as having zero gradient.
template <typename T>
class AdamW {
 public:
  AdamW(std::vector<Tensor<T>> params, AdamWConfig cfg);

  /// Applies one update. If any grad is NaN/Inf the step is aborted before
  /// touching parameters or moments and DivergenceError is thrown.
  void step();
  void zero_grad();

  std::int64_t step_count() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }
  const std::vector<AdamWSlot<T>>& slots() const { return slots_; }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<AdamWSlot<T>> slots_;
  AdamWConfig cfg_;
  std::int64_t t_ = 0;
};

}  // namespace cure::nn
