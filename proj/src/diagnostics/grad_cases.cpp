// SPDX-License-Identifier: Apache-2.0
#include "cure/diagnostics/grad_cases.hpp"

#include <algorithm>
#include <cmath>

#include "cure/common/rng.hpp"
#include "cure/nn/grad_check.hpp"
#include "cure/nn/layers.hpp"
#include "cure/nn/ops.hpp"
#include "cure/pipeline/losses.hpp"
#include "cure/pipeline/model.hpp"

namespace cure::diagnostics {

namespace {

using nn::Tensord;

/// Values bounded away from zero so relu's kink is never straddled.
Tensord rand_tensor(nn::Shape shape, Rng& rng, bool avoid_zero = false) {
  std::vector<double> v(nn::numel_of(shape));
  for (auto& x : v) {
    x = rng.uniform(-1.0, 1.0);
    if (avoid_zero && std::abs(x) < 0.1) x = x < 0 ? x - 0.1 : x + 0.1;
  }
  return Tensord::from(std::move(shape), std::move(v));
}

/// sum(out * r) for a fixed random r, so every output coordinate matters.
Tensord project(const Tensord& out, const Tensord& r) { return nn::sum(nn::mul(out, r)); }

double check_all(const std::function<Tensord()>& f, std::vector<Tensord> inputs) {
  double worst = 0.0;
  for (auto& x : inputs) worst = std::max(worst, nn::grad_check(f, x).max_rel_error);
  return worst;
}

template <typename Layer>
std::vector<Tensord> params_of(const Layer& layer) {
  std::vector<Tensord> out;
  for (auto& p : layer.parameters()) out.push_back(p.tensor);
  return out;
}

using Unary = Tensord (*)(const Tensord&);

GradCase unary_case(std::string name, Unary op, bool avoid_zero = false) {
  return {std::move(name), [op, avoid_zero](std::uint64_t seed) {
            Rng rng(seed, "grad");
            auto x = rand_tensor({3, 4}, rng, avoid_zero);
            auto r = rand_tensor({3, 4}, rng);
            return check_all([&] { return project(op(x), r); }, {x});
          }};
}

using Binary = Tensord (*)(const Tensord&, const Tensord&);

GradCase binary_case(std::string name, Binary op) {
  return {std::move(name), [op](std::uint64_t seed) {
            Rng rng(seed, "grad");
            auto a = rand_tensor({3, 4}, rng);
            auto b = rand_tensor({3, 4}, rng);
            auto r = rand_tensor({3, 4}, rng);
            return check_all([&] { return project(op(a, b), r); }, {a, b});
          }};
}

}  // namespace

std::vector<GradCase> all_grad_cases() {
  std::vector<GradCase> cases;
  cases.push_back({"matmul", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     auto a = rand_tensor({3, 4}, rng);
                     auto b = rand_tensor({4, 2}, rng);
                     auto r = rand_tensor({3, 2}, rng);
                     return check_all([&] { return project(nn::matmul(a, b), r); }, {a, b});
                   }});
  cases.push_back({"transpose", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     auto a = rand_tensor({3, 4}, rng);
                     auto r = rand_tensor({4, 3}, rng);
                     return check_all([&] { return project(nn::transpose(a), r); }, {a});
                   }});
  cases.push_back(binary_case("add", &nn::add<double>));
  cases.push_back(binary_case("sub", &nn::sub<double>));
  cases.push_back(binary_case("mul", &nn::mul<double>));
  cases.push_back({"add_bias", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     auto x = rand_tensor({3, 4}, rng);
                     auto b = rand_tensor({4}, rng);
                     auto r = rand_tensor({3, 4}, rng);
                     return check_all([&] { return project(nn::add_bias(x, b), r); }, {x, b});
                   }});
  cases.push_back({"mul_row", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     auto x = rand_tensor({3, 4}, rng);
                     auto g = rand_tensor({4}, rng);
                     auto r = rand_tensor({3, 4}, rng);
                     return check_all([&] { return project(nn::mul_row(x, g), r); }, {x, g});
                   }});
  cases.push_back({"scale", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     auto x = rand_tensor({3, 4}, rng);
                     auto r = rand_tensor({3, 4}, rng);
                     return check_all([&] { return project(nn::scale(x, -1.7), r); }, {x});
                   }});
  cases.push_back({"add_scalar", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     auto x = rand_tensor({3, 4}, rng);
                     auto r = rand_tensor({3, 4}, rng);
                     return check_all([&] { return project(nn::add_scalar(x, 0.3), r); }, {x});
                   }});
  cases.push_back(unary_case("relu", &nn::relu<double>, true));
  cases.push_back(unary_case("silu", &nn::silu<double>));
  cases.push_back(unary_case("gelu", &nn::gelu<double>));
  cases.push_back(unary_case("exp", &nn::exp<double>));
  cases.push_back(unary_case("log_softmax", &nn::log_softmax<double>));
  cases.push_back({"sum", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     auto x = rand_tensor({3, 4}, rng);
                     return check_all([&] { return nn::sum(nn::mul(x, x)); }, {x});
                   }});
  cases.push_back({"mean", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     auto x = rand_tensor({3, 4}, rng);
                     return check_all([&] { return nn::mean(nn::mul(x, x)); }, {x});
                   }});
  cases.push_back({"row_sum", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     auto x = rand_tensor({3, 4}, rng);
                     auto r = rand_tensor({3}, rng);
                     return check_all([&] { return project(nn::row_sum(x), r); }, {x});
                   }});
  cases.push_back({"layer_norm", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     auto x = rand_tensor({3, 5}, rng);
                     auto g = rand_tensor({5}, rng);
                     auto b = rand_tensor({5}, rng);
                     auto r = rand_tensor({3, 5}, rng);
                     return check_all([&] { return project(nn::layer_norm(x, g, b), r); }, {x, g, b});
                   }});
  cases.push_back({"softmax_cross_entropy", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     auto logits = rand_tensor({4, 3}, rng);
                     std::vector<int> targets;
                     for (int i = 0; i < 4; ++i) targets.push_back(static_cast<int>(rng.index(3)));
                     return check_all([&] { return nn::softmax_cross_entropy<double>(logits, targets); },
                                      {logits});
                   }});
  cases.push_back({"cosine_similarity", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     auto a = rand_tensor({6}, rng);
                     auto b = rand_tensor({6}, rng);
                     return check_all([&] { return nn::cosine_similarity(a, b); }, {a, b});
                   }});
  cases.push_back({"cosine_rows", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     auto a = rand_tensor({3, 5}, rng);
                     auto b = rand_tensor({3, 5}, rng);
                     auto r = rand_tensor({3}, rng);
                     return check_all([&] { return project(nn::cosine_rows(a, b), r); }, {a, b});
                   }});
  cases.push_back({"mse", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     auto a = rand_tensor({3, 4}, rng);
                     auto b = rand_tensor({3, 4}, rng);
                     return check_all([&] { return nn::mse(a, b); }, {a, b});
                   }});
  cases.push_back({"block_attention", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     auto q = rand_tensor({6, 4}, rng);
                     auto k = rand_tensor({6, 4}, rng);
                     auto v = rand_tensor({6, 5}, rng);
                     auto r = rand_tensor({6, 5}, rng);
                     return check_all([&] { return project(nn::block_attention(q, k, v, 3), r); },
                                      {q, k, v});
                   }});

  cases.push_back({"Linear", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     nn::Linear<double> layer(5, 3, rng);
                     auto x = rand_tensor({4, 5}, rng);
                     auto r = rand_tensor({4, 3}, rng);
                     auto inputs = params_of(layer);
                     inputs.push_back(x);
                     return check_all([&] { return project(layer.forward(x), r); }, inputs);
                   }});
  cases.push_back({"LayerNorm", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     nn::LayerNorm<double> layer(6);
                     auto x = rand_tensor({3, 6}, rng);
                     auto r = rand_tensor({3, 6}, rng);
                     auto inputs = params_of(layer);
                     inputs.push_back(x);
                     return check_all([&] { return project(layer.forward(x), r); }, inputs);
                   }});
  cases.push_back({"TransformerEncoderLayer", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     nn::TransformerEncoderLayer<double> layer(8, 4, rng);
                     auto x = rand_tensor({4, 8}, rng);
                     auto r = rand_tensor({4, 8}, rng);
                     auto inputs = params_of(layer);
                     inputs.push_back(x);
                     return check_all([&] { return project(layer.forward(x, 4), r); }, inputs);
                   }});
  cases.push_back({"SwiGLU", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     nn::SwiGLU<double> layer(8, 6, rng);
                     auto x = rand_tensor({1, 8}, rng);
                     auto r = rand_tensor({1, 8}, rng);
                     auto inputs = params_of(layer);
                     inputs.push_back(x);
                     return check_all([&] { return project(layer.forward(x), r); }, inputs);
                   }});

  cases.push_back({"ContentExtractor", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     pipeline::ContentExtractor<double> phi(8, rng);
                     for (auto& s : phi.residual_scale().values()) s = rng.uniform(0.1, 1.0);
                     auto x = rand_tensor({3, 8}, rng);
                     auto r = rand_tensor({3, 8}, rng);
                     auto inputs = params_of(phi);
                     inputs.push_back(x);
                     return check_all([&] { return project(phi.forward(x), r); }, inputs);
                   }});
  cases.push_back({"DebiasModule", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     pipeline::DebiasModule<double> psi(8, rng);
                     auto x = rand_tensor({3, 8}, rng);
                     auto r = rand_tensor({3, 8}, rng);
                     auto inputs = params_of(psi);
                     inputs.push_back(x);
                     return check_all([&] { return project(psi.forward(x), r); }, inputs);
                   }});
  cases.push_back({"concept_dropout_loss", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     auto logits = rand_tensor({4, 5}, rng);
                     return check_all([&] { return pipeline::concept_dropout_loss(logits, 1.5); },
                                      {logits});
                   }});
  cases.push_back({"reconstruction_loss", [](std::uint64_t seed) {
                     Rng rng(seed, "grad");
                     auto a = rand_tensor({4, 6}, rng);
                     auto b = rand_tensor({4, 6}, rng);
                     return check_all([&] { return pipeline::reconstruction_loss(a, b); }, {a, b});
                   }});
  for (auto mode : {pipeline::Mode::kRemoval, pipeline::Mode::kEnhancement}) {
    cases.push_back({std::string("margin_loss/") + pipeline::to_string(mode), [mode](std::uint64_t seed) {
                       Rng rng(seed, "grad");
                       auto a = rand_tensor({5, 6}, rng);
                       auto b = rand_tensor({5, 6}, rng);
                       return check_all([&] { return pipeline::margin_loss(a, b, 0.0, mode); }, {a, b});
                     }});
  }
  return cases;
}

}  // namespace cure::diagnostics
