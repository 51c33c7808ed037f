// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cure/nn/ops.hpp"
#include "cure/pipeline/model.hpp"

namespace cure::pipeline {

/// Concept dropout loss on concept-head logits [n x C]:
///   mean_i sum_c p_ic * log(p_ic / (1/C)^tau),   p_i = softmax(logits_i).
/// Its minimum (tau - 1) ln C is reached iff every p_i is uniform. tau only
/// shifts the loss by a constant, so the gradient does not depend on it.
template <typename T>
nn::Tensor<T> concept_dropout_loss(const nn::Tensor<T>& logits, double tau);

/// (tau - 1) ln C.
double concept_dropout_floor(double tau, std::size_t n_concepts);

/// ||recon - x||^2 averaged over batch and dimensions.
template <typename T>
nn::Tensor<T> reconstruction_loss(const nn::Tensor<T>& recon, const nn::Tensor<T>& x);

/// Per-pair hinge on a cosine value:
///   removal      max(0, 1 - cos - M)
///   enhancement  max(0, cos - M)
/// Throws ContractError for Mode::kOff.
double hinge_term(double cos, double margin, Mode mode);

/// Mean hinge over row pairs of `a` = f_psi(x) and `b` = f_psi(x_cont).
/// Throws ContractError for Mode::kOff and ConfigError for M outside [0, 1].
template <typename T>
nn::Tensor<T> margin_loss(const nn::Tensor<T>& a, const nn::Tensor<T>& b, double margin, Mode mode,
                          nn::CosineDiagnostics* diag = nullptr);

}  // namespace cure::pipeline
