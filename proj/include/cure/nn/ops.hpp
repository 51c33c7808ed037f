// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

#include "cure/nn/tensor.hpp"

namespace cure::nn {

// Shapes: "rows" ops treat any tensor as [numel/d x d] with d = trailing dim.

/// [m x k] . [k x n] -> [m x n]. Throws DimensionError naming both shapes.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> transpose(const Tensor<T>& a);

// Elementwise, identical shapes.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

/// x[..., d] + bias[d], broadcast over rows.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);

/// x[..., d] * gain[d], broadcast over rows.
template <typename T>
Tensor<T> mul_row(const Tensor<T>& x, const Tensor<T>& gain);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s);

template <typename T>
Tensor<T> relu(const Tensor<T>& a);
template <typename T>
Tensor<T> silu(const Tensor<T>& a);
/// tanh approximation.
template <typename T>
Tensor<T> gelu(const Tensor<T>& a);
template <typename T>
Tensor<T> exp(const Tensor<T>& a);

/// Sum / mean of all elements -> [1].
template <typename T>
Tensor<T> sum(const Tensor<T>& a);
template <typename T>
Tensor<T> mean(const Tensor<T>& a);

/// Per-row sum over the trailing dim: [n x d] -> [n].
template <typename T>
Tensor<T> row_sum(const Tensor<T>& a);

/// Per-row standardization then affine. Requires d > 1.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5));

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& logits);

/// mean_i -log softmax(logits_i)[target_i]. Throws IndexError for targets
/// outside [0, K).
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> targets);

/// Count of zero-norm inputs seen by the cosine ops. The denominator is
/// clamped at kCosineEps instead of failing.
struct CosineDiagnostics {
  std::size_t degenerate = 0;
};
inline constexpr double kCosineEps = 1e-8;

/// a[d], b[d] -> [1], clamped to [-1, 1].
template <typename T>
Tensor<T> cosine_similarity(const Tensor<T>& a, const Tensor<T>& b,
                            CosineDiagnostics* diag = nullptr);

/// Row-wise cosine: [n x d], [n x d] -> [n].
template <typename T>
Tensor<T> cosine_rows(const Tensor<T>& a, const Tensor<T>& b, CosineDiagnostics* diag = nullptr);

/// mean over all elements of (a - b)^2.
template <typename T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b);

/// Scaled dot-product attention applied independently to consecutive blocks
/// of `seq_len` rows. q, k: [n x h], v: [n x e] with n % seq_len == 0.
template <typename T>
Tensor<T> block_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                          std::size_t seq_len);

}  // namespace cure::nn
