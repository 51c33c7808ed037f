// SPDX-License-Identifier: Apache-2.0
#include "cure/pipeline/losses.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cure/common/errors.hpp"

namespace cure::pipeline {

template <typename T>
nn::Tensor<T> concept_dropout_loss(const nn::Tensor<T>& logits, double tau) {
  const std::size_t n = logits.rows();
  const double log_c = std::log(static_cast<double>(logits.cols()));
  auto log_p = nn::log_softmax(logits);
  auto p = nn::exp(log_p);
  // log(p / (1/C)^tau) = log p + tau ln C
  auto ratio = nn::add_scalar(log_p, static_cast<T>(tau * log_c));
  return nn::scale(nn::sum(nn::mul(p, ratio)), static_cast<T>(1.0 / static_cast<double>(n)));
}

double concept_dropout_floor(double tau, std::size_t n_concepts) {
  return (tau - 1.0) * std::log(static_cast<double>(n_concepts));
}

template <typename T>
nn::Tensor<T> reconstruction_loss(const nn::Tensor<T>& recon, const nn::Tensor<T>& x) {
  return nn::mse(recon, x);
}

namespace {

void check_margin(double margin, Mode mode) {
  if (mode == Mode::kOff) {
    throw ContractError("margin loss requested with mode off; the caller must skip this stage");
  }
  if (!(margin >= 0.0 && margin <= 1.0)) {
    std::ostringstream os;
    os << "model.margin must lie in [0, 1], got " << margin;
    throw ConfigError(os.str());
  }
}

}  // namespace

double hinge_term(double cos, double margin, Mode mode) {
  check_margin(margin, mode);
  return mode == Mode::kRemoval ? std::max(0.0, 1.0 - cos - margin) : std::max(0.0, cos - margin);
}

template <typename T>
nn::Tensor<T> margin_loss(const nn::Tensor<T>& a, const nn::Tensor<T>& b, double margin, Mode mode,
                          nn::CosineDiagnostics* diag) {
  check_margin(margin, mode);
  auto cos = nn::cosine_rows(a, b, diag);
  nn::Tensor<T> term;
  if (mode == Mode::kRemoval) {
    term = nn::relu(nn::add_scalar(nn::scale(cos, T(-1)), static_cast<T>(1.0 - margin)));
  } else {
    term = nn::relu(nn::add_scalar(cos, static_cast<T>(-margin)));
  }
  return nn::mean(term);
}

#define CURE_INSTANTIATE_LOSSES(T)                                                          \
  template nn::Tensor<T> concept_dropout_loss(const nn::Tensor<T>&, double);                \
  template nn::Tensor<T> reconstruction_loss(const nn::Tensor<T>&, const nn::Tensor<T>&);   \
  template nn::Tensor<T> margin_loss(const nn::Tensor<T>&, const nn::Tensor<T>&, double, Mode, \
                                     nn::CosineDiagnostics*);
CURE_INSTANTIATE_LOSSES(float)
CURE_INSTANTIATE_LOSSES(double)
#undef CURE_INSTANTIATE_LOSSES

}  // namespace cure::pipeline
