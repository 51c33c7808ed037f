// SPDX-License-Identifier: Apache-2.0
#include "cure/nn/layers.hpp"

#include <cmath>

#include "cure/common/errors.hpp"
#include "cure/nn/ops.hpp"

namespace cure::nn {

namespace {

template <typename T>
Tensor<T> uniform_param(Shape shape, double bound, Rng& rng) {
  std::vector<T> v(numel_of(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>::from(std::move(shape), std::move(v), true);
}

}  // namespace

template <typename T>
Linear<T>::Linear(std::size_t in, std::size_t out, Rng& rng) {
  if (in == 0 || out == 0) throw DimensionError("Linear: zero-sized layer");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight_ = uniform_param<T>({in, out}, bound, rng);
  bias_ = uniform_param<T>({out}, bound, rng);
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) const {
  return add_bias(matmul(x, weight_), bias_);
}

template <typename T>
void Linear<T>::collect_parameters(const std::string& prefix,
                                   std::vector<NamedParam<T>>& out) const {
  out.push_back({join_name(prefix, "weight"), weight_});
  out.push_back({join_name(prefix, "bias"), bias_});
}

template <typename T>
LayerNorm<T>::LayerNorm(std::size_t d, T eps)
    : gamma_(Tensor<T>::full({d}, T(1), true)), beta_(Tensor<T>::zeros({d}, true)), eps_(eps) {
  if (d < 2) throw DimensionError("LayerNorm: width must exceed 1");
}

template <typename T>
Tensor<T> LayerNorm<T>::forward(const Tensor<T>& x) const {
  return layer_norm(x, gamma_, beta_, eps_);
}

template <typename T>
void LayerNorm<T>::collect_parameters(const std::string& prefix,
                                      std::vector<NamedParam<T>>& out) const {
  out.push_back({join_name(prefix, "gamma"), gamma_});
  out.push_back({join_name(prefix, "beta"), beta_});
}

template <typename T>
TransformerEncoderLayer<T>::TransformerEncoderLayer(std::size_t d, std::size_t inner, Rng& rng)
    : q_(d, inner, rng),
      k_(d, inner, rng),
      v_(d, inner, rng),
      o_(inner, d, rng),
      ff1_(d, inner, rng),
      ff2_(inner, d, rng),
      ln1_(d),
      ln2_(d) {}

template <typename T>
Tensor<T> TransformerEncoderLayer<T>::forward(const Tensor<T>& x, std::size_t seq_len) const {
  auto attn = o_.forward(block_attention(q_.forward(x), k_.forward(x), v_.forward(x), seq_len));
  auto h = ln1_.forward(add(x, attn));
  auto ff = ff2_.forward(gelu(ff1_.forward(h)));
  return ln2_.forward(add(h, ff));
}

template <typename T>
void TransformerEncoderLayer<T>::collect_parameters(const std::string& prefix,
                                                    std::vector<NamedParam<T>>& out) const {
  q_.collect_parameters(join_name(prefix, "attn.q"), out);
  k_.collect_parameters(join_name(prefix, "attn.k"), out);
  v_.collect_parameters(join_name(prefix, "attn.v"), out);
  o_.collect_parameters(join_name(prefix, "attn.o"), out);
  ff1_.collect_parameters(join_name(prefix, "ff1"), out);
  ff2_.collect_parameters(join_name(prefix, "ff2"), out);
  ln1_.collect_parameters(join_name(prefix, "ln1"), out);
  ln2_.collect_parameters(join_name(prefix, "ln2"), out);
}

template <typename T>
SwiGLU<T>::SwiGLU(std::size_t d, std::size_t hidden, Rng& rng)
    : gate_(d, hidden, rng), value_(d, hidden, rng), down_(hidden, d, rng) {}

template <typename T>
Tensor<T> SwiGLU<T>::forward(const Tensor<T>& x) const {
  return down_.forward(mul(silu(gate_.forward(x)), value_.forward(x)));
}

template <typename T>
void SwiGLU<T>::collect_parameters(const std::string& prefix,
                                   std::vector<NamedParam<T>>& out) const {
  gate_.collect_parameters(join_name(prefix, "gate"), out);
  value_.collect_parameters(join_name(prefix, "value"), out);
  down_.collect_parameters(join_name(prefix, "down"), out);
}

template class Linear<float>;
template class Linear<double>;
template class LayerNorm<float>;
template class LayerNorm<double>;
template class TransformerEncoderLayer<float>;
template class TransformerEncoderLayer<double>;
template class SwiGLU<float>;
template class SwiGLU<double>;

}  // namespace cure::nn
