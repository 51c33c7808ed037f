// SPDX-License-Identifier: Apache-2.0
#include "cure/nn/adamw.hpp"

#include <cmath>
#include <string>

#include "cure/common/errors.hpp"

namespace cure::nn {

template <typename T>
void adamw_step(std::span<T> params, std::span<const T> grads, AdamWSlot<T>& slot,
                const AdamWConfig& cfg, std::int64_t t) {
  if (!grads.empty() && grads.size() != params.size()) {
    throw DimensionError("adamw_step: " + std::to_string(params.size()) + " params vs " +
                         std::to_string(grads.size()) + " grads");
  }
  if (t < 1) throw ConfigError("adamw_step: step index must be >= 1");
  if (slot.m.size() != params.size()) {
    slot.m.assign(params.size(), T(0));
    slot.v.assign(params.size(), T(0));
  }
  const T lr = static_cast<T>(cfg.lr);
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T eps = static_cast<T>(cfg.eps);
  const T decay = static_cast<T>(1.0 - cfg.lr * cfg.weight_decay);
  const T bc1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(t)));
  const T bc2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(t)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads.empty() ? T(0) : grads[i];
    slot.m[i] = b1 * slot.m[i] + (T(1) - b1) * g;
    slot.v[i] = b2 * slot.v[i] + (T(1) - b2) * g * g;
    const T m_hat = slot.m[i] / bc1;
    const T v_hat = slot.v[i] / bc2;
    params[i] = params[i] * decay - lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

template <typename T>
AdamW<T>::AdamW(std::vector<Tensor<T>> params, AdamWConfig cfg)
    : params_(std::move(params)), slots_(params_.size()), cfg_(cfg) {
  if (!(cfg_.lr > 0.0)) throw ConfigError("AdamW: learning rate must be > 0");
}

template <typename T>
void AdamW<T>::step() {
  for (std::size_t p = 0; p < params_.size(); ++p) {
    for (T g : params_[p].grad()) {
      if (!std::isfinite(g)) {
        throw DivergenceError("AdamW: non-finite gradient at step " + std::to_string(t_ + 1) +
                              " (parameter tensor " + std::to_string(p) + ")");
      }
    }
  }
  ++t_;
  for (std::size_t p = 0; p < params_.size(); ++p) {
    adamw_step<T>(params_[p].values(), params_[p].grad(), slots_[p], cfg_, t_);
  }
  for (std::size_t p = 0; p < params_.size(); ++p) {
    for (T v : params_[p].values()) {
      if (!std::isfinite(v)) {
        throw DivergenceError("AdamW: parameter became non-finite at step " +
                              std::to_string(t_));
      }
    }
  }
}

template <typename T>
void AdamW<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template void adamw_step<float>(std::span<float>, std::span<const float>, AdamWSlot<float>&,
                                const AdamWConfig&, std::int64_t);
template void adamw_step<double>(std::span<double>, std::span<const double>,
                                 AdamWSlot<double>&, const AdamWConfig&, std::int64_t);
template class AdamW<float>;
template class AdamW<double>;

}  // namespace cure::nn
